#ifndef VALVEKIT_H
#define VALVEKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a library call.
typedef enum VkStatus {
  VK_STATUS_OK = 0,
  VK_STATUS_NULL_POINTER = 1,
  VK_STATUS_INVALID_INPUT = 2,
  VK_STATUS_USAGE = 3,
  VK_STATUS_IO = 4,
  VK_STATUS_FORMAT = 5,
  VK_STATUS_GEOMETRY = 6,
  VK_STATUS_PERCEPTION = 7,
  VK_STATUS_REGISTRATION = 8,
  VK_STATUS_INTERNAL = 9,
} VkStatus;

// Outcome of one mission phase.
typedef enum VkPhaseOutcome {
  VK_PHASE_OUTCOME_SUCCESS = 0,
  VK_PHASE_OUTCOME_FAILURE = 1,
  VK_PHASE_OUTCOME_SKIPPED = 2,
} VkPhaseOutcome;

// Robustness sweep kind.
typedef enum VkRobustnessKind {
  VK_ROBUSTNESS_KIND_VALVE_DROPOUT = 0,
  VK_ROBUSTNESS_KIND_VALVE_NOISE = 1,
  VK_ROBUSTNESS_KIND_WRENCH_JITTER = 2,
} VkRobustnessKind;

// Opaque result of a mission run.
typedef struct VkMissionRun VkMissionRun;

// Opaque mission scenario.
typedef struct VkScenario VkScenario;

// Minimum-area rectangle around a point set.
typedef struct VkRotatedBox {
  double center_x;
  double center_y;
  // Sorted side lengths, `extent_min <= extent_max`.
  double extent_min;
  double extent_max;
  // Direction of one side in `[0, π/2)` (rad).
  double angle;
  double area;
} VkRotatedBox;

// Wrench insertion plan (rad).
typedef struct VkInsertionPlan {
  double approach_angle;
  double insertable_angles[3];
  uint32_t insertable_count;
  double turn_angle;
} VkInsertionPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next failing call.
const char *vk_last_error(void);

// Release a string returned by the library.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void vk_string_free(char *s);

// Built-in 50 m scenario.
struct VkScenario *vk_scenario_default(void);

// Parse a scenario from JSON text.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum VkStatus vk_scenario_from_json(const char *json, struct VkScenario **out);

// Load a scenario file; a relative scene file resolves against its directory.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum VkStatus vk_scenario_load(const char *path, struct VkScenario **out);

// # Safety
// `scenario` must be a valid handle.
enum VkStatus vk_scenario_set_seed(struct VkScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must be null or a handle not yet freed.
void vk_scenario_free(struct VkScenario *scenario);

// Run the full mission. Phase failures are not call failures: inspect the run.
//
// # Safety
// `scenario` must be a valid handle and `out` a valid pointer.
enum VkStatus vk_mission_run(const struct VkScenario *scenario, struct VkMissionRun **out);

// # Safety
// `run` must be null or a handle not yet freed.
void vk_mission_free(struct VkMissionRun *run);

// Number of phases in a report (always 12).
//
// # Safety
// `run` must be a valid handle.
size_t vk_mission_phase_count(const struct VkMissionRun *run);

// Name, simulated duration (s) and outcome of phase `index`. `name` receives a static string.
//
// # Safety
// `run` must be a valid handle; output pointers must be valid or null.
enum VkStatus vk_mission_phase(const struct VkMissionRun *run,
                               size_t index,
                               const char **name,
                               double *duration,
                               enum VkPhaseOutcome *outcome);

// Total simulated time (s), or NaN for a null handle.
//
// # Safety
// `run` must be a valid handle.
double vk_mission_total(const struct VkMissionRun *run);

// Whether every phase succeeded.
//
// # Safety
// `run` must be a valid handle.
bool vk_mission_success(const struct VkMissionRun *run);

// Report as JSON; release with [`vk_string_free`]. Null on failure.
//
// # Safety
// `run` must be a valid handle.
char *vk_mission_report_json(const struct VkMissionRun *run);

// Write report.json, trajectory.csv and compute.csv into `dir`.
//
// # Safety
// `run` must be a valid handle and `dir` a valid NUL-terminated string.
enum VkStatus vk_mission_write(const struct VkMissionRun *run, const char *dir);

// Minimum-area enclosing rectangle of `n` points given as interleaved `x, y` pairs.
//
// # Safety
// `xy` must point to `2·n` doubles and `out` must be valid.
enum VkStatus vk_min_area_rect(const double *xy, size_t n, struct VkRotatedBox *out);

// Insertion plan for a stem rolled by `stem_angle` (rad).
//
// # Safety
// `out` must be valid.
enum VkStatus vk_insertion_plan(double stem_angle, struct VkInsertionPlan *out);

// Success rate at each of the `n` grid values, written to `rates`.
//
// # Safety
// `grid` and `rates` must each point to `n` doubles.
enum VkStatus vk_robustness(enum VkRobustnessKind kind,
                            const double *grid,
                            size_t n,
                            size_t repeats,
                            uint64_t seed,
                            double *rates);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VALVEKIT_H */
