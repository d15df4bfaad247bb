#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "analytic.hpp"
#include "error.hpp"
#include "gaussian.hpp"
#include "postselect.hpp"
#include "presets.hpp"
#include "rng.hpp"
#include "sme.hpp"
#include "units.hpp"

namespace omtsim {

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

using nlohmann::json;  // keys stay sorted, so dump() is canonical
namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& ctx) {
  require(obj.is_object(), ErrorCode::ParseError, ctx + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    require(allowed.count(it.key()) == 1, ErrorCode::ParseError,
            ctx + ": unknown key \"" + it.key() + "\"");
}

double num(const json& obj, const std::string& key, const std::string& ctx) {
  require(obj.contains(key) && obj[key].is_number(), ErrorCode::ParseError,
          ctx + ": missing numeric key \"" + key + "\"");
  return obj[key].get<double>();
}

double num_or(const json& obj, const std::string& key, double def) {
  if (!obj.contains(key)) return def;
  require(obj[key].is_number(), ErrorCode::ParseError,
          "key \"" + key + "\" must be a number");
  return obj[key].get<double>();
}

std::vector<double> num_array(const json& node, const std::string& ctx) {
  require(node.is_array() && !node.empty(), ErrorCode::ParseError,
          ctx + ": expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : node) {
    require(v.is_number(), ErrorCode::ParseError, ctx + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> num_array_or(const json& obj, const std::string& key,
                                 std::vector<double> def) {
  if (!obj.contains(key)) return def;
  return num_array(obj[key], key);
}

class Tsv {
 public:
  Tsv(const fs::path& path, const std::string& experiment, uint64_t hash,
      uint64_t seed, const std::vector<std::string>& columns)
      : out_(path) {
    require(out_.good(), ErrorCode::IoError, "cannot write " + path.string());
    out_ << "# schema_version=1\n";
    out_ << "# experiment=" << experiment << "\n";
    out_ << "# config_hash=" << hex64(hash) << "\n";
    out_ << "# seed=" << seed << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "\t" : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "\t" : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

void record(std::vector<std::string>& files, const fs::path& path) {
  files.push_back(fs::absolute(path).string());
}

// ---------------------------------------------------------------------------
// config fragments

json physical_to_json(const PhysicalParams& p) {
  json j;
  j["chi"] = to_hz(p.chi);
  j["omega_m"] = to_hz(p.omega_m);
  j["gamma"] = to_hz(p.gamma);
  j["n_bar"] = p.n_bar;
  j["g"] = to_hz(p.g);
  j["kappa"] = to_hz(p.kappa);
  j["T1"] = p.T1;
  j["T2"] = p.T2;
  if (p.g0) j["g0"] = to_hz(*p.g0);
  if (p.lambda_opt) j["lambda_opt"] = *p.lambda_opt;
  if (p.m_eff) j["m_eff"] = *p.m_eff;
  return j;
}

struct SystemSpec {
  std::string label;
  PhysicalParams physical;
  ChannelParams channel;
};

// Resolves "preset"/"physical"/"channel" in place. The physical block is
// embedded into the config so manifests stand alone even if presets.json
// changes later.
SystemSpec resolve_system(json& cfg, const std::string& default_preset) {
  SystemSpec out;
  if (cfg.contains("physical")) {
    out.physical = physical_params_from_json_text(cfg["physical"].dump());
    out.label = cfg.value("preset", "custom");
  } else {
    const std::string name = cfg.value("preset", default_preset);
    require(!name.empty(), ErrorCode::ParseError,
            "config needs \"preset\" or \"physical\"");
    out.physical = load_preset(name).physical;
    out.label = name;
  }
  cfg["preset"] = out.label;
  cfg["physical"] = physical_to_json(out.physical);

  const json ch = cfg.value("channel", json::object());
  check_keys(ch, {"tau", "eta", "phi"}, "channel");
  out.channel.tau = num_or(ch, "tau", 1.0);
  out.channel.eta = num_or(ch, "eta", 1.0);
  out.channel.phi = num_or(ch, "phi", pi / 2);
  out.channel.validate();
  cfg["channel"] = {{"tau", out.channel.tau},
                    {"eta", out.channel.eta},
                    {"phi", out.channel.phi}};
  return out;
}

T2Convention resolve_t2_convention(json& cfg) {
  const std::string s = cfg.value("t2_convention", "face_value");
  cfg["t2_convention"] = s;
  if (s == "face_value") return T2Convention::FaceValue;
  if (s == "coherence_time") return T2Convention::CoherenceTime;
  fail(ErrorCode::ParseError, "unknown t2_convention: " + s);
}

SmeRates rates_from_json(const json& obj) {
  check_keys(obj, {"gamma_minus", "gamma_1", "gamma_2", "Gamma", "eta"},
             "rates");
  SmeRates r;
  r.gamma_minus = num(obj, "gamma_minus", "rates");
  r.gamma_1 = num(obj, "gamma_1", "rates");
  r.gamma_2 = num(obj, "gamma_2", "rates");
  r.Gamma = num(obj, "Gamma", "rates");
  r.eta = num_or(obj, "eta", 1.0);
  r.validate();
  return r;
}

json rates_to_json(const SmeRates& r) {
  return {{"gamma_minus", r.gamma_minus},
          {"gamma_1", r.gamma_1},
          {"gamma_2", r.gamma_2},
          {"Gamma", r.Gamma},
          {"eta", r.eta}};
}

SignMode resolve_sign_mode(json& cfg) {
  const std::string s = cfg.value("sign_mode", "total_spin");
  cfg["sign_mode"] = s;
  return sign_mode_from_string(s);
}

CalibrationMode parse_calibration(const std::string& s) {
  if (s == "mixture") return CalibrationMode::Mixture;
  if (s == "windowed_trace") return CalibrationMode::WindowedTrace;
  fail(ErrorCode::ParseError, "unknown calibration mode: " + s);
}

uint64_t resolve_seed(json& cfg) {
  uint64_t seed = 1;
  if (cfg.contains("seed")) {
    require(cfg["seed"].is_number_unsigned(), ErrorCode::ParseError,
            "seed must be a non-negative integer");
    seed = cfg["seed"].get<uint64_t>();
  }
  cfg["seed"] = seed;
  return seed;
}

int resolve_n_traj(json& cfg, int def) {
  const int n = static_cast<int>(num_or(cfg, "n_traj", def));
  require(n >= 1, ErrorCode::ParseError, "n_traj must be >= 1");
  cfg["n_traj"] = n;
  return n;
}

// Builds the equation inputs for configs that specify either bare coefficients
// ("rates") or a physical system ("preset"/"physical" plus "channel").
SmeConfig resolve_sme_system(json& cfg) {
  SmeConfig sme;
  if (cfg.contains("rates")) {
    require(!cfg.contains("preset") && !cfg.contains("physical"),
            ErrorCode::ParseError,
            "give either \"rates\" or a physical system, not both");
    const SmeRates r = rates_from_json(cfg["rates"]);
    cfg["rates"] = rates_to_json(r);
    sme.rates = rates_from_sme(r);
  } else {
    const SystemSpec sys = resolve_system(cfg, "");
    const T2Convention conv = resolve_t2_convention(cfg);
    sme.rates = derive_rates(sys.physical, sys.channel, conv);
  }
  sme.sign_mode = resolve_sign_mode(cfg);
  sme.dt = num_or(cfg, "dt", 0.0);
  cfg["dt"] = sme.dt;
  return sme;
}

// ---------------------------------------------------------------------------
// shared trajectory machinery

struct SelectedPoint {
  double T = 0;
  PostselectionReport rep;
};

// One ensemble run to max(T_grid), evaluated at every (grid time, success
// target) pair post hoc; the conditioned dynamics is causal, so one run
// serves all earlier selection times.
std::vector<std::vector<SelectedPoint>> multi_target_curves(
    const Mat4c& rho0, SmeConfig sme, const std::vector<double>& T_grid,
    const std::vector<double>& p_set) {
  require(!T_grid.empty() && !p_set.empty(), ErrorCode::InvalidArgument,
          "empty sweep grid");
  sme.T = *std::max_element(T_grid.begin(), T_grid.end());
  sme.snapshot_times = T_grid;
  sme.store_states = true;
  const auto ensemble = run_ensemble(rho0, sme);
  const SmeRates rates = sme_rates(sme.rates);

  std::vector<std::vector<SelectedPoint>> out(p_set.size());
  for (std::size_t pi = 0; pi < p_set.size(); ++pi) {
    for (double t : T_grid) {
      PostselectionConfig sel;
      sel.mode = SelectionMode::TargetSuccess;
      sel.p_succ_target = p_set[pi];
      sel.T = t;
      sel.Gamma_eff = rates.Gamma;  // already the lossy joint rate
      sel.eta = rates.eta;
      sel.tau = 1.0;
      out[pi].push_back({t, select(ensemble, sel)});
    }
  }
  return out;
}

const SelectedPoint& best_point(const std::vector<SelectedPoint>& curve) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].rep.mean_concurrence > curve[best].rep.mean_concurrence)
      best = i;
  return curve[best];
}

// ---------------------------------------------------------------------------
// experiments; each resolves its config (mutating cfg), freezes the hash,
// then executes, so output headers match the manifest exactly on rerun

void run_rates(json& cfg, const fs::path& dir, uint64_t seed, uint64_t& hash,
               std::vector<std::string>& files) {
  check_keys(cfg, {"experiment", "seed", "preset", "channel", "t2_convention"},
             "rates config");
  const std::string which = cfg.value("preset", "all");
  cfg["preset"] = which;
  const json ch = cfg.value("channel", json::object());
  check_keys(ch, {"tau", "eta", "phi"}, "channel");
  ChannelParams channel;
  channel.tau = num_or(ch, "tau", 1.0);
  channel.eta = num_or(ch, "eta", 1.0);
  channel.phi = num_or(ch, "phi", pi / 2);
  channel.validate();
  cfg["channel"] = {{"tau", channel.tau},
                    {"eta", channel.eta},
                    {"phi", channel.phi}};
  const T2Convention conv = resolve_t2_convention(cfg);
  const std::vector<std::string> names =
      which == "all" ? list_presets() : std::vector<std::string>{which};
  hash = fnv1a64(cfg.dump());

  Tsv tsv(dir / "rates.tsv", "rates", hash, seed,
          {"preset", "gamma_meas_hz", "gamma_meas_ref_hz", "gamma_meas_delta",
           "cooperativity", "cooperativity_ref", "cooperativity_delta",
           "tau_meas_s", "gamma_mech_hz", "gamma_loss_1_hz", "gamma_relax_hz",
           "gamma_phi_hz", "power_w", "power_ref_w", "power_delta",
           "force_sens_n_rthz", "force_sens_ref_n_rthz", "pos_sens_m_rthz",
           "pos_sens_ref_m_rthz"});
  record(files, dir / "rates.tsv");
  for (const std::string& name : names) {
    const Preset p = load_preset(name);
    const EffectiveRates er = derive_rates(p.physical, channel, conv);
    const double gm_hz = to_hz(er.gamma_meas);
    const double coop = cooperativity(p.physical);
    const double pw = driving_power(p.physical);
    tsv.row({name, fmt(gm_hz), fmt(p.reference.gamma_meas),
             fmt(gm_hz / p.reference.gamma_meas - 1.0), fmt(coop),
             fmt(p.reference.cooperativity),
             fmt(coop / p.reference.cooperativity - 1.0),
             fmt(measurement_time(p.physical)), fmt(to_hz(er.gamma_mech_1)),
             fmt(to_hz(er.gamma_loss_1)), fmt(to_hz(er.gamma_relax)),
             fmt(to_hz(er.gamma_phi)), fmt(pw), fmt(p.reference.power),
             fmt(pw / p.reference.power - 1.0),
             fmt(force_sensitivity(p.physical)),
             fmt(p.reference.force_sensitivity),
             fmt(position_sensitivity(p.physical)),
             fmt(p.reference.position_sensitivity)});
  }
}

void dump_matrix(std::ofstream& out, const std::string& name,
                 const Eigen::Matrix4d& M) {
  out << name << ":\n";
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) out << (j ? "\t" : "") << fmt(M(i, j));
    out << "\n";
  }
}

void run_eliminate(json& cfg, const fs::path& dir, uint64_t seed,
                   uint64_t& hash, std::vector<std::string>& files) {
  check_keys(
      cfg,
      {"experiment", "seed", "preset", "physical", "channel", "sweep_ratios"},
      "eliminate config");
  const SystemSpec sys = resolve_system(cfg, "nanobeam");
  const double phi = sys.channel.phi;
  const std::vector<double> ratios =
      num_array_or(cfg, "sweep_ratios", {0.05, 0.02, 0.01});
  cfg["sweep_ratios"] = ratios;
  hash = fnv1a64(cfg.dump());

  const PhysicalParams& p = sys.physical;
  const EffectiveRates er = derive_rates(p, ChannelParams{});
  const EliminationResult el = eliminate(p, phi);
  const TransducerSystem ts = build_system(p, phi);

  const fs::path report = dir / "eliminate_report.txt";
  {
    std::ofstream out(report);
    require(out.good(), ErrorCode::IoError, "cannot write " + report.string());
    out << "# transducer elimination report, schema_version=1\n";
    out << "# system=" << sys.label << "\tphi=" << fmt(phi) << "\n";
    out << "# config_hash=" << hex64(hash) << "\n";
    dump_matrix(out, "A", ts.A);
    dump_matrix(out, "N", ts.N);
    dump_matrix(out, "cov_unconditional", el.cov_unconditional);
    dump_matrix(out, "cov_conditional", el.cov_conditional);
    out << "Lambda_re:";
    for (int i = 0; i < 4; ++i) out << "\t" << fmt(el.lambda(i).real());
    out << "\nLambda_im:";
    for (int i = 0; i < 4; ++i) out << "\t" << fmt(el.lambda(i).imag());
    out << "\namplitude:\t" << fmt(el.amplitude.real()) << "\t"
        << fmt(el.amplitude.imag()) << "\n";
    out << "gamma_meas_eliminated:\t" << fmt(el.gamma_meas) << "\n";
    out << "gamma_meas_closed_form:\t" << fmt(er.gamma_meas) << "\n";
    out << "gamma_meas_rel_delta:\t" << fmt(el.gamma_meas / er.gamma_meas - 1.0)
        << "\n";
    out << "gamma_total_eliminated:\t" << fmt(el.gamma_total) << "\n";
    out << "gamma_excess_eliminated:\t" << fmt(el.gamma_excess) << "\n";
    out << "gamma_mech_closed_form:\t" << fmt(er.gamma_mech_1) << "\n";
  }
  record(files, report);

  Tsv tsv(dir / "eliminate_sweep.tsv", "eliminate", hash, seed,
          {"g_over_kappa", "g_hz", "gamma_meas_closed_form",
           "gamma_meas_eliminated", "meas_rel_err", "gamma_mech_closed_form",
           "gamma_excess_eliminated", "excess_rel_err"});
  record(files, dir / "eliminate_sweep.tsv");
  for (double ratio : ratios) {
    PhysicalParams q = p;
    q.g = ratio * q.kappa;
    const EffectiveRates er_q = derive_rates(q, ChannelParams{});
    const EliminationResult el_q = eliminate(q, phi);
    tsv.row({fmt(ratio), fmt(to_hz(q.g)), fmt(er_q.gamma_meas),
             fmt(el_q.gamma_meas),
             fmt(std::abs(el_q.gamma_meas / er_q.gamma_meas - 1.0)),
             fmt(er_q.gamma_mech_1), fmt(el_q.gamma_excess),
             fmt(std::abs(el_q.gamma_excess / er_q.gamma_mech_1 - 1.0))});
  }
}

void run_simulate(json& cfg, const fs::path& dir, uint64_t seed,
                  uint64_t& hash, std::vector<std::string>& files,
                  json& extra) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "preset", "physical", "channel",
              "rates", "sign_mode", "dt", "T", "snapshot_count",
              "snapshot_times", "t2_convention"},
             "simulate config");
  SmeConfig sme = resolve_sme_system(cfg);
  sme.seed = seed;
  sme.n_traj = resolve_n_traj(cfg, 100);
  sme.T = num(cfg, "T", "simulate");
  require(sme.T > 0, ErrorCode::ParseError, "T must be positive");
  if (cfg.contains("snapshot_times")) {
    sme.snapshot_times = num_array(cfg["snapshot_times"], "snapshot_times");
  } else {
    const int count = static_cast<int>(num_or(cfg, "snapshot_count", 50));
    require(count >= 1, ErrorCode::ParseError, "snapshot_count must be >= 1");
    cfg["snapshot_count"] = count;
    for (int i = 0; i <= count; ++i)
      sme.snapshot_times.push_back(sme.T * i / count);
  }
  cfg["snapshot_times"] = sme.snapshot_times;
  sme.store_states = false;
  hash = fnv1a64(cfg.dump());

  const auto ensemble = run_ensemble(plus_plus_state(), sme);
  Tsv tsv(dir / "trajectories.tsv", "simulate", hash, seed,
          {"traj", "t", "current", "J"});
  record(files, dir / "trajectories.tsv");
  json streams = json::array();
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    streams.push_back(ensemble[k].dW_stream_id);
    for (std::size_t i = 0; i < ensemble[k].times.size(); ++i)
      tsv.row({std::to_string(k), fmt(ensemble[k].times[i]),
               fmt(ensemble[k].current[i]), fmt(ensemble[k].J[i])});
  }
  extra["streams"] = streams;
}

void run_postselect(json& cfg, const fs::path& dir, uint64_t seed,
                    uint64_t& hash, std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "preset", "physical", "channel",
              "rates", "sign_mode", "dt", "T", "selection", "t2_convention"},
             "postselect config");
  SmeConfig sme = resolve_sme_system(cfg);
  sme.seed = seed;
  sme.n_traj = resolve_n_traj(cfg, 2000);
  sme.T = num(cfg, "T", "postselect");
  require(sme.T > 0, ErrorCode::ParseError, "T must be positive");
  sme.snapshot_times = {sme.T};

  require(cfg.contains("selection"), ErrorCode::ParseError,
          "postselect config needs a \"selection\" block");
  const json sel_cfg = cfg["selection"];
  check_keys(sel_cfg, {"mode", "nu", "p_succ"}, "selection");
  PostselectionConfig sel;
  sel.T = sme.T;
  const SmeRates rates = sme_rates(sme.rates);
  const std::string mode = sel_cfg.value("mode", "target");
  if (mode == "fixed") {
    sel.mode = SelectionMode::FixedCutoff;
    sel.nu = num(sel_cfg, "nu", "selection");
    cfg["selection"] = {{"mode", mode}, {"nu", sel.nu}};
  } else if (mode == "target") {
    sel.mode = SelectionMode::TargetSuccess;
    sel.p_succ_target = num(sel_cfg, "p_succ", "selection");
    sel.Gamma_eff = rates.Gamma;
    sel.eta = rates.eta;
    sel.tau = 1.0;
    cfg["selection"] = {{"mode", mode}, {"p_succ", sel.p_succ_target}};
  } else {
    fail(ErrorCode::ParseError, "unknown selection mode: " + mode);
  }
  hash = fnv1a64(cfg.dump());

  const auto ensemble = run_ensemble(plus_plus_state(), sme);
  const PostselectionReport rep = select(ensemble, sel);

  Tsv tsv(dir / "postselect_report.tsv", "postselect", hash, seed,
          {"T", "nu", "kept_fraction", "n_kept", "n_total", "C_mean", "C_se",
           "C_of_mean", "empty"});
  record(files, dir / "postselect_report.tsv");
  tsv.row({fmt(rep.T), fmt(rep.nu), fmt(rep.kept_fraction),
           std::to_string(rep.n_kept), std::to_string(rep.n_total),
           fmt(rep.mean_concurrence), fmt(rep.se_concurrence),
           fmt(rep.concurrence_of_mean), rep.empty ? "1" : "0"});

  Tsv stsv(dir / "mean_state.tsv", "postselect", hash, seed,
           {"row", "col", "re", "im"});
  record(files, dir / "mean_state.tsv");
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      stsv.row({std::to_string(i), std::to_string(j),
                fmt(rep.mean_state(i, j).real()),
                fmt(rep.mean_state(i, j).imag())});
}

void run_analytic(json& cfg, const fs::path& dir, uint64_t seed,
                  uint64_t& hash, std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "rates", "sign_mode", "p_succ", "T_grid",
              "calibration"},
             "analytic config");
  require(cfg.contains("rates"), ErrorCode::ParseError,
          "analytic config needs \"rates\"");
  const SmeRates rates = rates_from_json(cfg["rates"]);
  cfg["rates"] = rates_to_json(rates);
  AnalyticCurveOptions opt;
  opt.sign_mode = resolve_sign_mode(cfg);
  const std::string calib = cfg.value("calibration", "mixture");
  cfg["calibration"] = calib;
  opt.calibration = parse_calibration(calib);
  const double p_succ = num(cfg, "p_succ", "analytic");
  require(cfg.contains("T_grid"), ErrorCode::ParseError,
          "analytic config needs \"T_grid\"");
  const std::vector<double> grid = num_array(cfg["T_grid"], "T_grid");
  cfg["T_grid"] = grid;
  hash = fnv1a64(cfg.dump());

  const auto curve = analytic_curve(plus_plus_state(), rates, p_succ, grid, opt);
  Tsv tsv(dir / "analytic_curve.tsv", "analytic", hash, seed,
          {"T", "C", "kept_fraction", "nu"});
  record(files, dir / "analytic_curve.tsv");
  for (const auto& pt : curve)
    tsv.row({fmt(pt.T), fmt(pt.C_mean), fmt(pt.kept_fraction), fmt(pt.nu)});
}

// Shared tau/eta/p sweep behind figure3(b,c) and the sweep command. T grids
// are dimensionless multiples of the pre-loss measurement time.
struct SweepRow {
  double tau, eta, p_succ;
  double T_opt_scaled, T_opt_s, C_opt, se, C_of_mean, kept;
};

std::vector<SweepRow> sweep_core(const PhysicalParams& phys, T2Convention conv,
                                 const std::vector<double>& tau_grid,
                                 const std::vector<double>& eta_grid,
                                 const std::vector<double>& p_set,
                                 const std::vector<double>& T_grid_scaled,
                                 SignMode sign, int n_traj, uint64_t seed,
                                 uint64_t& ensemble_counter) {
  std::vector<SweepRow> rows;
  for (double eta : eta_grid)
    for (double tau : tau_grid) {
      ChannelParams ch;
      ch.tau = tau;
      ch.eta = eta;
      const EffectiveRates er = derive_rates(phys, ch, conv);
      SmeConfig sme;
      sme.rates = er;
      sme.sign_mode = sign;
      sme.n_traj = n_traj;
      sme.seed = derive_stream(seed, ensemble_counter++);
      std::vector<double> T_grid;
      for (double s : T_grid_scaled) T_grid.push_back(s / er.gamma_meas);
      const auto curves =
          multi_target_curves(plus_plus_state(), sme, T_grid, p_set);
      for (std::size_t pi = 0; pi < p_set.size(); ++pi) {
        const SelectedPoint& best = best_point(curves[pi]);
        rows.push_back({tau, eta, p_set[pi], best.T * er.gamma_meas, best.T,
                        best.rep.mean_concurrence, best.rep.se_concurrence,
                        best.rep.concurrence_of_mean,
                        best.rep.kept_fraction});
      }
    }
  return rows;
}

void run_figure3(json& cfg, const fs::path& dir, uint64_t seed, uint64_t& hash,
                 std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "preset", "physical", "channel",
              "t2_convention", "panel_a", "panel_b", "panel_c"},
             "figure3 config");
  const SystemSpec sys = resolve_system(cfg, "nanobeam");
  const T2Convention conv = resolve_t2_convention(cfg);
  const int n_traj = resolve_n_traj(cfg, 2000);

  auto panel_cfg = [&](const std::string& key, bool& enabled) {
    json panel = cfg.value(key, json::object());
    enabled = !(panel.is_boolean() && !panel.get<bool>());
    if (panel.is_boolean()) panel = json::object();
    return panel;
  };

  bool a_on = true, b_on = true, c_on = true;

  const json pa = panel_cfg("panel_a", a_on);
  check_keys(pa, {"T_grid_scaled", "p_succ_set"}, "panel_a");
  const std::vector<double> a_grid = num_array_or(
      pa, "T_grid_scaled",
      {0.15, 0.3, 0.55, 0.8, 1.05, 1.3, 1.6, 2.0, 2.5, 3.0, 4.0});
  const std::vector<double> a_pset = num_array_or(pa, "p_succ_set", {0.1, 0.5});
  cfg["panel_a"] =
      a_on ? json{{"T_grid_scaled", a_grid}, {"p_succ_set", a_pset}}
           : json(false);

  const json pb = panel_cfg("panel_b", b_on);
  check_keys(pb, {"tau_grid", "eta_set", "p_succ", "T_grid_scaled"}, "panel_b");
  const std::vector<double> b_tau =
      num_array_or(pb, "tau_grid", {0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0});
  const std::vector<double> b_eta =
      num_array_or(pb, "eta_set", {1.0, 0.8, 0.6, 0.4, 0.2});
  const double b_p = num_or(pb, "p_succ", 0.1);
  const std::vector<double> b_grid = num_array_or(
      pb, "T_grid_scaled", {0.2, 0.35, 0.5, 0.65, 0.8, 1.0, 1.3, 1.8, 2.6, 3.8});
  cfg["panel_b"] = b_on ? json{{"tau_grid", b_tau},
                               {"eta_set", b_eta},
                               {"p_succ", b_p},
                               {"T_grid_scaled", b_grid}}
                        : json(false);

  const json pc = panel_cfg("panel_c", c_on);
  check_keys(pc, {"tau_grid", "p_succ_set", "T_grid_scaled"}, "panel_c");
  const std::vector<double> c_tau =
      num_array_or(pc, "tau_grid", {0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0});
  const std::vector<double> c_pset =
      num_array_or(pc, "p_succ_set", {0.1, 0.3, 0.5});
  const std::vector<double> c_grid =
      num_array_or(pc, "T_grid_scaled", {0.2, 0.35, 0.5, 0.65, 0.8, 1.0, 1.3});
  cfg["panel_c"] = c_on ? json{{"tau_grid", c_tau},
                               {"p_succ_set", c_pset},
                               {"T_grid_scaled", c_grid}}
                        : json(false);

  hash = fnv1a64(cfg.dump());
  uint64_t counter = 0;

  if (a_on) {
    const EffectiveRates er = derive_rates(sys.physical, ChannelParams{}, conv);
    SmeConfig sme;
    sme.rates = er;
    sme.n_traj = n_traj;
    sme.seed = derive_stream(seed, counter++);
    std::vector<double> T_grid;
    for (double s : a_grid) T_grid.push_back(s / er.gamma_meas);
    const auto curves =
        multi_target_curves(plus_plus_state(), sme, T_grid, a_pset);

    Tsv tsv(dir / "fig3a.tsv", "figure3", hash, seed,
            {"p_succ", "T_scaled", "T_s", "C_mean", "C_se", "C_of_mean",
             "kept_fraction", "n_kept", "nu"});
    record(files, dir / "fig3a.tsv");
    for (std::size_t pi = 0; pi < a_pset.size(); ++pi)
      for (const auto& pt : curves[pi])
        tsv.row({fmt(a_pset[pi]), fmt(pt.T * er.gamma_meas), fmt(pt.T),
                 fmt(pt.rep.mean_concurrence), fmt(pt.rep.se_concurrence),
                 fmt(pt.rep.concurrence_of_mean), fmt(pt.rep.kept_fraction),
                 std::to_string(pt.rep.n_kept), fmt(pt.rep.nu)});
  }

  if (b_on) {
    const auto rows = sweep_core(sys.physical, conv, b_tau, b_eta, {b_p},
                                 b_grid, SignMode::TotalSpin, n_traj, seed,
                                 counter);
    Tsv tsv(dir / "fig3b.tsv", "figure3", hash, seed,
            {"eta", "tau", "p_succ", "T_opt_scaled", "T_opt_s", "C_opt",
             "C_se", "C_of_mean", "kept_fraction"});
    record(files, dir / "fig3b.tsv");
    for (const auto& r : rows)
      tsv.row({fmt(r.eta), fmt(r.tau), fmt(r.p_succ), fmt(r.T_opt_scaled),
               fmt(r.T_opt_s), fmt(r.C_opt), fmt(r.se), fmt(r.C_of_mean),
               fmt(r.kept)});
  }

  if (c_on) {
    const auto rows = sweep_core(sys.physical, conv, c_tau, {1.0}, c_pset,
                                 c_grid, SignMode::TotalSpin, n_traj, seed,
                                 counter);
    Tsv tsv(dir / "fig3c.tsv", "figure3", hash, seed,
            {"p_succ", "tau", "T_opt_scaled", "T_opt_s", "C_opt", "C_se",
             "C_of_mean", "kept_fraction"});
    record(files, dir / "fig3c.tsv");
    for (const auto& r : rows)
      tsv.row({fmt(r.p_succ), fmt(r.tau), fmt(r.T_opt_scaled), fmt(r.T_opt_s),
               fmt(r.C_opt), fmt(r.se), fmt(r.C_of_mean), fmt(r.kept)});
  }
}

void run_figure5(json& cfg, const fs::path& dir, uint64_t seed, uint64_t& hash,
                 std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "rows", "p_succ_set", "T_grid",
              "calibration"},
             "figure5 config");
  const int n_traj = resolve_n_traj(cfg, 2000);
  json rows_cfg = cfg.value("rows", json::object());
  check_keys(rows_cfg, {"row1", "row2", "row3"}, "figure5 rows");
  if (!rows_cfg.contains("row1"))
    rows_cfg["row1"] = {{"gamma_minus", 0.1},
                        {"gamma_1", 0.2},
                        {"gamma_2", 0.2},
                        {"Gamma", 1.0},
                        {"eta", 0.6}};
  if (!rows_cfg.contains("row2"))
    rows_cfg["row2"] = {{"gamma_minus", 0.1},
                        {"gamma_1", 1.0},
                        {"gamma_2", 0.3},
                        {"Gamma", 1.0},
                        {"eta", 1.0}};
  if (!rows_cfg.contains("row3"))
    rows_cfg["row3"] = {{"gamma_minus", 0.8},
                        {"gamma_1", 0.0},
                        {"gamma_2", 0.0},
                        {"Gamma", 1.0},
                        {"eta", 1.0}};
  SmeRates row_rates[3];
  int ri = 0;
  for (const char* row_name : {"row1", "row2", "row3"}) {
    row_rates[ri] = rates_from_json(rows_cfg[row_name]);
    rows_cfg[row_name] = rates_to_json(row_rates[ri]);
    ++ri;
  }
  cfg["rows"] = rows_cfg;
  const std::vector<double> p_set =
      num_array_or(cfg, "p_succ_set", {0.1, 0.3, 0.5});
  cfg["p_succ_set"] = p_set;
  const std::vector<double> grid =
      num_array_or(cfg, "T_grid", {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0});
  cfg["T_grid"] = grid;
  const std::string calib = cfg.value("calibration", "mixture");
  cfg["calibration"] = calib;
  const CalibrationMode cmode = parse_calibration(calib);
  hash = fnv1a64(cfg.dump());

  Tsv tsv(dir / "fig5.tsv", "figure5", hash, seed,
          {"row", "p_succ", "T", "C_mean", "C_se", "C_of_mean",
           "kept_fraction", "n_kept", "analytic_C", "analytic_kept"});
  record(files, dir / "fig5.tsv");
  uint64_t counter = 0;
  for (int r = 0; r < 3; ++r) {
    const SmeRates& rates = row_rates[r];
    SmeConfig sme;
    sme.rates = rates_from_sme(rates);
    sme.n_traj = n_traj;
    sme.seed = derive_stream(seed, counter++);
    const auto curves = multi_target_curves(plus_plus_state(), sme, grid, p_set);
    for (std::size_t pi = 0; pi < p_set.size(); ++pi) {
      AnalyticCurveOptions opt;
      opt.calibration = cmode;
      const auto ana =
          analytic_curve(plus_plus_state(), rates, p_set[pi], grid, opt);
      for (std::size_t ti = 0; ti < grid.size(); ++ti) {
        const auto& pt = curves[pi][ti];
        tsv.row({"row" + std::to_string(r + 1), fmt(p_set[pi]), fmt(pt.T),
                 fmt(pt.rep.mean_concurrence), fmt(pt.rep.se_concurrence),
                 fmt(pt.rep.concurrence_of_mean), fmt(pt.rep.kept_fraction),
                 std::to_string(pt.rep.n_kept), fmt(ana[ti].C_mean),
                 fmt(ana[ti].kept_fraction)});
      }
    }
  }
}

void run_figure6(json& cfg, const fs::path& dir, uint64_t seed, uint64_t& hash,
                 std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "panels", "T_grid",
              "analytic_calibration", "trajectories"},
             "figure6 config");
  const int n_traj = resolve_n_traj(cfg, 2000);
  json panels = cfg.value("panels", json::object());
  check_keys(panels, {"a", "b", "c"}, "figure6 panels");
  if (!panels.contains("a"))
    panels["a"] = {{"rates",
                    {{"gamma_minus", 0.05},
                     {"gamma_1", 0.2},
                     {"gamma_2", 0.2},
                     {"Gamma", 1.0},
                     {"eta", 1.0}}},
                   {"p_succ", 0.2}};
  if (!panels.contains("b"))
    panels["b"] = {{"rates",
                    {{"gamma_minus", 0.3},
                     {"gamma_1", 0.1},
                     {"gamma_2", 0.1},
                     {"Gamma", 1.0},
                     {"eta", 1.0}}},
                   {"p_succ", 0.1}};
  if (!panels.contains("c"))
    panels["c"] = {{"rates",
                    {{"gamma_minus", 0.3},
                     {"gamma_1", 0.1},
                     {"gamma_2", 0.1},
                     {"Gamma", 1.0},
                     {"eta", 1.0}}},
                   {"p_succ", 0.5}};
  SmeRates panel_rates[3];
  double panel_p[3];
  int idx = 0;
  for (const char* key : {"a", "b", "c"}) {
    json& pc = panels[key];
    check_keys(pc, {"rates", "p_succ"}, "figure6 panel");
    panel_rates[idx] = rates_from_json(pc["rates"]);
    pc["rates"] = rates_to_json(panel_rates[idx]);
    panel_p[idx] = num(pc, "p_succ", "figure6 panel");
    ++idx;
  }
  cfg["panels"] = panels;
  const std::vector<double> grid = num_array_or(
      cfg, "T_grid",
      {0.2, 0.4, 0.6, 0.8, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0});
  cfg["T_grid"] = grid;
  const std::string calib = cfg.value("analytic_calibration", "windowed_trace");
  cfg["analytic_calibration"] = calib;
  const CalibrationMode cmode = parse_calibration(calib);
  const bool with_traj = cfg.value("trajectories", true);
  cfg["trajectories"] = with_traj;
  hash = fnv1a64(cfg.dump());

  Tsv tsv(dir / "fig6.tsv", "figure6", hash, seed,
          {"panel", "strategy", "source", "p_succ", "T", "C", "C_se",
           "kept_fraction"});
  record(files, dir / "fig6.tsv");
  uint64_t counter = 0;
  const char* panel_names[3] = {"a", "b", "c"};
  for (int k = 0; k < 3; ++k) {
    for (SignMode mode : {SignMode::TotalSpin, SignMode::SpinDifference}) {
      const std::string strategy = to_string(mode);
      AnalyticCurveOptions opt;
      opt.sign_mode = mode;
      opt.calibration = cmode;
      const auto ana = analytic_curve(plus_plus_state(), panel_rates[k],
                                      panel_p[k], grid, opt);
      for (const auto& pt : ana)
        tsv.row({panel_names[k], strategy, "analytic", fmt(panel_p[k]),
                 fmt(pt.T), fmt(pt.C_mean), "0", fmt(pt.kept_fraction)});
      if (!with_traj) continue;
      SmeConfig sme;
      sme.rates = rates_from_sme(panel_rates[k]);
      sme.sign_mode = mode;
      sme.n_traj = n_traj;
      sme.seed = derive_stream(seed, counter++);
      const auto curves =
          multi_target_curves(plus_plus_state(), sme, grid, {panel_p[k]});
      for (const auto& pt : curves[0])
        tsv.row({panel_names[k], strategy, "trajectory", fmt(panel_p[k]),
                 fmt(pt.T), fmt(pt.rep.mean_concurrence),
                 fmt(pt.rep.se_concurrence), fmt(pt.rep.kept_fraction)});
    }
  }
}

void run_sweep(json& cfg, const fs::path& dir, uint64_t seed, uint64_t& hash,
               std::vector<std::string>& files) {
  check_keys(cfg,
             {"experiment", "seed", "n_traj", "preset", "physical", "channel",
              "t2_convention", "tau_grid", "eta_grid", "p_succ_set",
              "T_grid_scaled", "sign_mode"},
             "sweep config");
  const SystemSpec sys = resolve_system(cfg, "nanobeam");
  const T2Convention conv = resolve_t2_convention(cfg);
  const int n_traj = resolve_n_traj(cfg, 2000);
  const SignMode sign = resolve_sign_mode(cfg);
  const std::vector<double> tau_grid = num_array_or(cfg, "tau_grid", {1.0});
  const std::vector<double> eta_grid = num_array_or(cfg, "eta_grid", {1.0});
  const std::vector<double> p_set = num_array_or(cfg, "p_succ_set", {0.1});
  const std::vector<double> grid =
      num_array_or(cfg, "T_grid_scaled", {0.2, 0.35, 0.5, 0.65, 0.8, 1.0, 1.3});
  cfg["tau_grid"] = tau_grid;
  cfg["eta_grid"] = eta_grid;
  cfg["p_succ_set"] = p_set;
  cfg["T_grid_scaled"] = grid;
  hash = fnv1a64(cfg.dump());

  uint64_t counter = 0;
  const auto rows = sweep_core(sys.physical, conv, tau_grid, eta_grid, p_set,
                               grid, sign, n_traj, seed, counter);
  Tsv tsv(dir / "sweep.tsv", "sweep", hash, seed,
          {"tau", "eta", "p_succ", "T_opt_scaled", "T_opt_s", "C_opt", "C_se",
           "C_of_mean", "kept_fraction"});
  record(files, dir / "sweep.tsv");
  for (const auto& r : rows)
    tsv.row({fmt(r.tau), fmt(r.eta), fmt(r.p_succ), fmt(r.T_opt_scaled),
             fmt(r.T_opt_s), fmt(r.C_opt), fmt(r.se), fmt(r.C_of_mean),
             fmt(r.kept)});
}

}  // namespace

ExperimentOutput run_experiment_text(const std::string& config_text,
                                     const std::string& out_dir) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("config parse error: ") + e.what());
  }
  require(doc.is_object(), ErrorCode::ParseError, "config must be an object");
  // A previously emitted manifest carries the resolved config inside.
  json cfg = doc.contains("config") ? doc["config"] : doc;
  require(cfg.is_object() && cfg.contains("experiment") &&
              cfg["experiment"].is_string(),
          ErrorCode::ParseError, "config needs an \"experiment\" string");
  const std::string experiment = cfg["experiment"].get<std::string>();
  const uint64_t seed = resolve_seed(cfg);

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::IoError,
          "cannot create output directory " + dir.string());

  ExperimentOutput out;
  out.experiment = experiment;
  uint64_t hash = 0;
  json extra = json::object();
  try {
    if (experiment == "rates")
      run_rates(cfg, dir, seed, hash, out.files);
    else if (experiment == "eliminate")
      run_eliminate(cfg, dir, seed, hash, out.files);
    else if (experiment == "simulate")
      run_simulate(cfg, dir, seed, hash, out.files, extra);
    else if (experiment == "postselect")
      run_postselect(cfg, dir, seed, hash, out.files);
    else if (experiment == "analytic")
      run_analytic(cfg, dir, seed, hash, out.files);
    else if (experiment == "figure3")
      run_figure3(cfg, dir, seed, hash, out.files);
    else if (experiment == "figure5")
      run_figure5(cfg, dir, seed, hash, out.files);
    else if (experiment == "figure6")
      run_figure6(cfg, dir, seed, hash, out.files);
    else if (experiment == "sweep")
      run_sweep(cfg, dir, seed, hash, out.files);
    else
      fail(ErrorCode::ParseError, "unknown experiment: " + experiment);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config error: ") + e.what());
  }
  out.config_hash = hash;

  json manifest;
  manifest["schema_version"] = 1;
  manifest["experiment"] = experiment;
  manifest["config_hash"] = hex64(hash);
  manifest["seed"] = seed;
  manifest["created_utc"] = utc_now();
  manifest["config"] = cfg;
  manifest["files"] = json::array();
  for (const std::string& f : out.files)
    manifest["files"].push_back(fs::path(f).filename().string());
  for (auto it = extra.begin(); it != extra.end(); ++it)
    manifest[it.key()] = it.value();

  const fs::path mpath = dir / "manifest.json";
  std::ofstream mout(mpath);
  require(mout.good(), ErrorCode::IoError, "cannot write " + mpath.string());
  mout << manifest.dump(2) << "\n";
  out.manifest_path = fs::absolute(mpath).string();
  return out;
}

ExperimentOutput run_experiment_file(const std::string& config_path,
                                     const std::string& out_dir) {
  std::ifstream in(config_path);
  require(in.good(), ErrorCode::IoError, "cannot open " + config_path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return run_experiment_text(text, out_dir);
}

}  // namespace omtsim
