#ifndef OMTSIM_H
#define OMTSIM_H

/* C interface to the transducer-mediated entanglement simulator. All entry
 * points return a status code; on failure omtsim_last_error() holds a
 * human-readable message for the calling thread. Pointers returned through
 * out-parameters are owned by the caller and released with the matching
 * _free function. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum omtsim_status {
  OMTSIM_OK = 0,
  OMTSIM_ERR_INVALID_ARGUMENT = 1,
  OMTSIM_ERR_PARSE = 2,
  OMTSIM_ERR_NOT_FOUND = 3,
  OMTSIM_ERR_SOLVER = 4,
  OMTSIM_ERR_IO = 5,
  OMTSIM_ERR_INTERNAL = 6
} omtsim_status;

const char* omtsim_version(void);

/* Message of the most recent failure on this thread; never NULL. */
const char* omtsim_last_error(void);

/* Opaque physical parameter set (one transducer node plus its qubit). */
typedef struct omtsim_params omtsim_params;

/* data_dir NULL means $OMTSIM_DATA_DIR or the built-in default. */
omtsim_status omtsim_params_from_preset(const char* name, const char* data_dir,
                                        omtsim_params** out);

/* Same schema as the "physical" block of experiment configs: plain-frequency
 * rates in Hz (chi, omega_m, gamma, g, kappa, optional g0), lifetimes T1/T2
 * in seconds, optional lambda_opt (m) and m_eff (kg). */
omtsim_status omtsim_params_from_json(const char* json_text,
                                      omtsim_params** out);

void omtsim_params_free(omtsim_params* p);

/* Effective coefficients of the reduced two-qubit equation for a channel with
 * transmission tau and detection efficiency eta. out_rates (length 8):
 *   [0] gamma_meas   per-node measurement rate (rad/s, pre-loss)
 *   [1] gamma_mech_1 thermal dephasing, node 1
 *   [2] gamma_mech_2 thermal dephasing, node 2 (tau-matched coupling)
 *   [3] gamma_loss_1 unrecorded back-action on node 1 from channel loss
 *   [4] gamma_relax  1/T1
 *   [5] gamma_phi    sigma_z dephasing coefficient from T2
 *   [6] eta
 *   [7] tau                                                            */
omtsim_status omtsim_derive_rates(const omtsim_params* p, double tau,
                                  double eta, double* out_rates);

/* Adiabatic elimination of the full Gaussian transducer at homodyne phase phi
 * (pi/2 measures the information-carrying quadrature). out_rates (length 3):
 * measurement rate, total back-action rate, excess (thermal) rate, rad/s. */
omtsim_status omtsim_eliminate(const omtsim_params* p, double phi,
                               double* out_rates);

/* Concurrence of a two-qubit density matrix given row-major as 16 (re, im)
 * pairs, i.e. 32 doubles. Fails if the matrix is not Hermitian,
 * unit-trace, and positive semidefinite within numerical tolerance. */
omtsim_status omtsim_concurrence(const double* rho_interleaved, double* out);

/* Runs one configuration-driven experiment. config is either inline JSON
 * (first non-space character '{') or a path to a JSON file; a manifest.json
 * from an earlier run reruns that experiment bit-exactly. overrides_json,
 * if non-NULL, is an object merged onto the config last (seed, n_traj, ...).
 * On success *manifest_path_out (if non-NULL) receives the absolute path of
 * the written manifest; release it with omtsim_string_free. */
omtsim_status omtsim_run_experiment(const char* config, const char* out_dir,
                                    const char* overrides_json,
                                    char** manifest_path_out);

void omtsim_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* OMTSIM_H */
