#ifndef LIPOBS_H
#define LIPOBS_H

/*
 * C interface to the lipobs observer-design library.
 *
 * Every function returning int returns a lipobs_status code. On failure the
 * message is available from lipobs_last_error() (per thread, valid until the
 * next failing call on that thread). Handles are opaque and owned by the
 * caller; release them with the matching *_free function (NULL is accepted).
 * Matrices are passed as row-major double arrays.
 * Optional scalar inputs use NAN to mean "not given".
 */

#include <stddef.h>

#if defined(_WIN32)
#define LIPOBS_API __declspec(dllexport)
#else
#define LIPOBS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lipobs_status {
    LIPOBS_OK = 0,
    LIPOBS_E_INVALID = 1,    /* bad arguments, malformed files, expression errors */
    LIPOBS_E_INFEASIBLE = 2, /* the LMI problem has no solution */
    LIPOBS_E_NUMERICAL = 3,  /* solver or verification failure */
    LIPOBS_E_BLOWUP = 4      /* simulation state became non-finite */
} lipobs_status;

typedef struct lipobs_plant lipobs_plant;
typedef struct lipobs_design lipobs_design;
typedef struct lipobs_trace lipobs_trace;

LIPOBS_API const char* lipobs_version(void);
LIPOBS_API const char* lipobs_last_error(void);

/* Diagnostics. level: 0 quiet, 1 info (one line per solve), 2 debug (solver iterations). */
typedef void (*lipobs_log_fn)(int level, const char* message, void* user);
LIPOBS_API void lipobs_set_logger(int level, lipobs_log_fn fn, void* user);

/* ---- plants ---------------------------------------------------------------------------- */

LIPOBS_API int lipobs_plant_load(const char* path, lipobs_plant** out);
LIPOBS_API int lipobs_plant_parse(const char* text, lipobs_plant** out);
LIPOBS_API int lipobs_plant_save(const lipobs_plant* plant, const char* path);

/* x' = A x + phi(x, u), y = C x. phi holds n expression strings (NULL for phi = 0). */
LIPOBS_API int lipobs_plant_create(int n, int m, int p, const double* A, const double* C,
                                   const char* const* phi, lipobs_plant** out);
/* B: n x q, D: p x q (NULL for zero), H: r x n. */
LIPOBS_API int lipobs_plant_set_disturbance(lipobs_plant* plant, int q, int r, const double* B, const double* D,
                                            const double* H);
LIPOBS_API int lipobs_plant_set_gamma(lipobs_plant* plant, double gamma);
LIPOBS_API int lipobs_plant_set_region(lipobs_plant* plant, const double* lower, const double* upper);
/* Design in x_bar = T x coordinates (T: n x n). NULL clears the transform. */
LIPOBS_API int lipobs_plant_set_transform(lipobs_plant* plant, const double* T);
LIPOBS_API int lipobs_plant_dims(const lipobs_plant* plant, int* n, int* m, int* p, int* q, int* r);
LIPOBS_API void lipobs_plant_free(lipobs_plant* plant);

/* Largest Jacobian spectral norm over a grid on the box [lower, upper] (NULL: the plant's region).
 * transformed != 0 estimates the nonlinearity in x_bar coordinates; the box is then in x_bar too
 * (the plant region is mapped). argmax (n doubles) may be NULL. samples <= 0 uses 21. */
LIPOBS_API int lipobs_estimate(const lipobs_plant* plant, const double* lower, const double* upper, int samples,
                               int transformed, double* value, double* argmax);

/* ---- synthesis ------------------------------------------------------------------------- */

typedef enum lipobs_theorem {
    LIPOBS_T1 = 1,  /* maximize gamma */
    LIPOBS_T3 = 3,  /* maximize gamma with decay rate beta > 0 */
    LIPOBS_T4 = 4,  /* minimize mu for a given gamma */
    LIPOBS_T5 = 5,  /* minimize lambda*xi + (1-lambda)*zeta */
    LIPOBS_FEAS = 6 /* feasibility for a given gamma (and mu) */
} lipobs_theorem;

typedef struct lipobs_synth_options {
    int theorem;
    double beta;       /* NAN: 0 */
    double gamma;      /* T4 / FEAS; NAN: the plant's gamma */
    double mu;         /* FEAS only */
    double lambda;     /* T5 only, required there */
    double margin;     /* strictness margin of the LMIs; NAN: 1e-6 */
    double gain_relax; /* relative index slack for gain polishing; NAN: 1e-3, 0 disables */
} lipobs_synth_options;

LIPOBS_API void lipobs_synth_options_init(lipobs_synth_options* options);
LIPOBS_API int lipobs_synthesize(const lipobs_plant* plant, const lipobs_synth_options* options,
                                 lipobs_design** out);

/* Re-run the certificate checks on the plant's design model. */
LIPOBS_API int lipobs_design_verify(const lipobs_design* design, const lipobs_plant* plant, int* pass);

LIPOBS_API int lipobs_design_load(const char* path, lipobs_design** out);
LIPOBS_API int lipobs_design_save(const lipobs_design* design, const char* path);
LIPOBS_API int lipobs_design_dims(const lipobs_design* design, int* n, int* p);
/* "t1", "t3", "t4", "t5", "feas" or "fixed_gain". */
LIPOBS_API const char* lipobs_design_theorem(const lipobs_design* design);
/* gamma_star, mu_star, beta, lambda, epsilon, alpha, xi, zeta, objective, certified_gap, kappa_p.
 * LIPOBS_E_INVALID when the design has no such value. */
LIPOBS_API int lipobs_design_scalar(const lipobs_design* design, const char* name, double* value);
/* "L", "P", "F" (design coordinates), "L_original" (T^-1 L), "T". Copies rows*cols doubles
 * into out when capacity suffices; rows/cols may be NULL. */
LIPOBS_API int lipobs_design_matrix(const lipobs_design* design, const char* name, double* out, size_t capacity,
                                    int* rows, int* cols);
/* Stored verification result, or re-verified after synthesis. */
LIPOBS_API int lipobs_design_verified(const lipobs_design* design, int* pass);
LIPOBS_API void lipobs_design_free(lipobs_design* design);

typedef struct lipobs_sweep_cell {
    double beta;
    double lambda;
    double gamma_star; /* NAN when the cell failed */
    double mu_star;
    double gain_norm;  /* largest singular value of L in original coordinates */
    int status;        /* lipobs_status of the cell */
} lipobs_sweep_cell;

/* Theorem 5 over the grid betas x lambdas; cells (nb*nl) ordered by beta then lambda.
 * Returns LIPOBS_OK when at least one cell solved. */
LIPOBS_API int lipobs_sweep(const lipobs_plant* plant, const double* betas, size_t nb, const double* lambdas,
                            size_t nl, lipobs_sweep_cell* cells);

/* ---- simulation ------------------------------------------------------------------------ */

typedef struct lipobs_sim_config {
    double t_end;                     /* default 10 */
    double dt;                        /* default 1e-3 */
    const double* x0;                 /* n values, original coordinates; NULL: zeros */
    const double* xhat0;              /* n values; NULL: zeros */
    const char* const* disturbance;   /* q expressions in t; NULL: w = 0 */
    size_t disturbance_count;
    const char* const* input;         /* m expressions in t; NULL: u = 0 */
    size_t input_count;
    int substeps;                     /* RK4 steps per sample; 0 chooses from the spectrum */
} lipobs_sim_config;

LIPOBS_API void lipobs_sim_config_init(lipobs_sim_config* config);

/* Simulates in the design's coordinates (x_bar when the plant has a transform) and stores
 * the trace in original coordinates. */
LIPOBS_API int lipobs_simulate(const lipobs_plant* plant, const lipobs_design* design,
                               const lipobs_sim_config* config, lipobs_trace** out);

typedef struct lipobs_decay_report {
    int pass;
    int disturbance_free;
    double worst_ratio;
    double worst_time;
    double kappa_p;
} lipobs_decay_report;

LIPOBS_API int lipobs_trace_samples(const lipobs_trace* trace, size_t* samples);
/* Columns as in the CSV header: t, x1..xn, xhat1..xhatn, e_norm, w1..wq, z1..zr. */
LIPOBS_API int lipobs_trace_column_count(const lipobs_trace* trace, size_t* count);
LIPOBS_API const char* lipobs_trace_column_name(const lipobs_trace* trace, size_t index);
LIPOBS_API int lipobs_trace_column(const lipobs_trace* trace, const char* name, double* out, size_t capacity);
/* Decay bound checked in design coordinates. */
LIPOBS_API int lipobs_trace_decay(const lipobs_trace* trace, lipobs_decay_report* report);
/* Empirical L2 gain; LIPOBS_E_INVALID when the disturbance is identically zero. */
LIPOBS_API int lipobs_trace_gain(const lipobs_trace* trace, double* gain);
LIPOBS_API int lipobs_trace_write_csv(const lipobs_trace* trace, const char* path, int stride);
LIPOBS_API void lipobs_trace_free(lipobs_trace* trace);

typedef struct lipobs_perturbation_report {
    double delta_lipschitz;
    double margin;           /* NAN when the plant has no gamma */
    int within_certificate;
    int blew_up;
    int converged;           /* ||e(t_end)|| <= 1e-3 ||e(0)|| */
    double final_ratio;
} lipobs_perturbation_report;

/* delta: n expressions in design coordinates added to the true plant's nonlinearity
 * (and to the observer's when shared != 0). */
LIPOBS_API int lipobs_perturbation_test(const lipobs_plant* plant, const lipobs_design* design,
                                        const char* const* delta, size_t count, const lipobs_sim_config* config,
                                        int shared, lipobs_perturbation_report* report);

#ifdef __cplusplus
}
#endif

#endif
