/** Host-side mirrors of the primary library's error types. */

export class ConfigError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "ConfigError";
    }
}

export class InputError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "InputError";
    }
}

export class StateError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "StateError";
    }
}
