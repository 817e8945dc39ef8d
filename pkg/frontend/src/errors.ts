/**
 * Typed errors mirroring the engine's stable error codes one to one.
 *
 * The CLI reports failures as a JSON object with a `code` field; the
 * binding rethrows them as the matching class here so callers can branch
 * with `instanceof` instead of parsing messages.
 */

export class BriseError extends Error {
  readonly code: string;

  constructor(message: string, code = "Error") {
    super(message);
    this.name = new.target.name;
    this.code = code;
  }
}

export class SchemaMismatchError extends BriseError {
  constructor(message: string) {
    super(message, "SchemaMismatch");
  }
}

export class PartialBlockError extends BriseError {
  constructor(message: string) {
    super(message, "PartialBlock");
  }
}

export class AllMissingRowError extends BriseError {
  constructor(message: string) {
    super(message, "AllMissingRow");
  }
}

export class NonNumericValueError extends BriseError {
  constructor(message: string) {
    super(message, "NonNumericValue");
  }
}

export class EmptyAfterFilterError extends BriseError {
  constructor(message: string) {
    super(message, "EmptyAfterFilter");
  }
}

export class GroupVanishedError extends BriseError {
  constructor(message: string) {
    super(message, "GroupVanished");
  }
}

export class InvalidKError extends BriseError {
  constructor(message: string) {
    super(message, "InvalidK");
  }
}

export class EmptyCandidatesError extends BriseError {
  constructor(message: string) {
    super(message, "EmptyCandidates");
  }
}

export class DegeneratePatternError extends BriseError {
  constructor(message: string) {
    super(message, "DegeneratePattern");
  }
}

export class InsufficientPatternSizeError extends BriseError {
  constructor(message: string) {
    super(message, "InsufficientPatternSize");
  }
}

export class TooLargeError extends BriseError {
  constructor(message: string) {
    super(message, "TooLarge");
  }
}

export class SingularCovarianceError extends BriseError {
  constructor(message: string) {
    super(message, "SingularCovariance");
  }
}

export class NumericOverflowError extends BriseError {
  constructor(message: string) {
    super(message, "NumericOverflow");
  }
}

export class InvalidConfigError extends BriseError {
  constructor(message: string) {
    super(message, "InvalidConfig");
  }
}

/** Failure to read or write files, or to launch the executable. */
export class IoError extends BriseError {
  constructor(message: string) {
    super(message, "io-error");
  }
}

const byCode: Record<string, new (message: string) => BriseError> = {
  SchemaMismatch: SchemaMismatchError,
  PartialBlock: PartialBlockError,
  AllMissingRow: AllMissingRowError,
  NonNumericValue: NonNumericValueError,
  EmptyAfterFilter: EmptyAfterFilterError,
  GroupVanished: GroupVanishedError,
  InvalidK: InvalidKError,
  EmptyCandidates: EmptyCandidatesError,
  DegeneratePattern: DegeneratePatternError,
  InsufficientPatternSize: InsufficientPatternSizeError,
  TooLarge: TooLargeError,
  SingularCovariance: SingularCovarianceError,
  NumericOverflow: NumericOverflowError,
  InvalidConfig: InvalidConfigError,
  "io-error": IoError,
};

/** Rebuild the typed error for a CLI-reported code; unknown codes keep the
 * base class with the code attached. */
export function errorFromCode(code: string, message: string): BriseError {
  const cls = byCode[code];
  return cls ? new cls(message) : new BriseError(message, code);
}
