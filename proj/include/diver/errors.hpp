#pragma once
#include <stdexcept>

namespace diver {

// Base class for every failure the library raises on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define DIVER_DEFINE_ERROR(NAME) \
  struct NAME : Error {          \
    using Error::Error;          \
  }

DIVER_DEFINE_ERROR(InvalidTrajectory);
DIVER_DEFINE_ERROR(InvalidScale);
DIVER_DEFINE_ERROR(InvalidSchedule);
DIVER_DEFINE_ERROR(InvalidDim);
DIVER_DEFINE_ERROR(InvalidCost);
DIVER_DEFINE_ERROR(InvalidBatch);
DIVER_DEFINE_ERROR(InvalidGroup);
DIVER_DEFINE_ERROR(InvalidSigma);
DIVER_DEFINE_ERROR(InvalidSet);
DIVER_DEFINE_ERROR(InvalidCorpus);
DIVER_DEFINE_ERROR(InvalidPair);
DIVER_DEFINE_ERROR(InvalidConfig);
DIVER_DEFINE_ERROR(InsufficientDiversity);
DIVER_DEFINE_ERROR(InsufficientData);
DIVER_DEFINE_ERROR(MissingAnchors);
DIVER_DEFINE_ERROR(StaleCache);
DIVER_DEFINE_ERROR(IoError);
DIVER_DEFINE_ERROR(ConfigMismatch);

#undef DIVER_DEFINE_ERROR

}  // namespace diver
