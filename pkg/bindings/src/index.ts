export { ConfigError, InputError, StateError } from "./errors.js";
export {
    BoundScheduler,
    type SchedulerConfig,
    type SchedulerFragment,
    type SchedulerState,
    type StepResult,
} from "./scheduler.js";
export {
    BoundThresholds,
    classStats,
    smoothingCoefficient,
    type ClassThresholdState,
    type ThresholdFragment,
    type ThresholdConfig,
} from "./thresholds.js";
