#pragma once

#include <stdexcept>
#include <string>

namespace sgdlm {

// Root of every error the library raises. Callers that only need to report
// failures can catch this; the subclasses exist so tests and the pipeline can
// distinguish recoverable conditions (a degenerate day) from bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error { using Error::Error; };
class DefinitenessError : public Error { using Error::Error; };
class NumericalDegeneracyError : public Error { using Error::Error; };
class NoRootError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class SingularityError : public Error { using Error::Error; };
class DegenerateSampleError : public Error { using Error::Error; };
class DegeneratePriorError : public Error { using Error::Error; };
class DegenerateRecouplingError : public Error { using Error::Error; };
class SelectionError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class GenerationError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class PipelineError : public Error { using Error::Error; };

}  // namespace sgdlm
