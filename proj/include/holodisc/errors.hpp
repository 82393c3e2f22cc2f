#pragma once

#include <stdexcept>
#include <string>

namespace holodisc {

/// Base of every error raised by the library. `kind()` is the stable name
/// used in reports and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define HOLODISC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

HOLODISC_DEFINE_ERROR(SingularStructure);
HOLODISC_DEFINE_ERROR(NonComplexLinear);
HOLODISC_DEFINE_ERROR(DegenerateDomain);
HOLODISC_DEFINE_ERROR(StructureRange);
HOLODISC_DEFINE_ERROR(NotContracting);
HOLODISC_DEFINE_ERROR(SolveFailed);
HOLODISC_DEFINE_ERROR(Diverged);
HOLODISC_DEFINE_ERROR(MaxIter);
HOLODISC_DEFINE_ERROR(RangeEscape);
HOLODISC_DEFINE_ERROR(Exhausted);
HOLODISC_DEFINE_ERROR(NoCover);
HOLODISC_DEFINE_ERROR(PoleEvaluation);
HOLODISC_DEFINE_ERROR(BlendOverlap);
HOLODISC_DEFINE_ERROR(DisconnectedTarget);
HOLODISC_DEFINE_ERROR(CorrectionTooLarge);
HOLODISC_DEFINE_ERROR(BasePointMismatch);
HOLODISC_DEFINE_ERROR(ConfigError);
HOLODISC_DEFINE_ERROR(InvalidArgument);

#undef HOLODISC_DEFINE_ERROR

/// Raised by the Poletsky pipeline; carries the failing stage and the
/// partial report (a JSON document rendered to text).
class PipelineFailed : public Error {
 public:
  PipelineFailed(std::string stage, const std::string& message, std::string report)
      : Error("PipelineFailed", stage + ": " + message),
        stage_(std::move(stage)),
        report_(std::move(report)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& report() const noexcept { return report_; }

 private:
  std::string stage_;
  std::string report_;
};

}  // namespace holodisc
