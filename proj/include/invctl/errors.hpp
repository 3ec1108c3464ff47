#pragma once

#include <stdexcept>
#include <string>

namespace invctl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ImproperSystem : Error {
    using Error::Error;
};
struct SingularResolvent : Error {
    using Error::Error;
};
struct IllPosedLoop : Error {
    using Error::Error;
};
struct SingularLFT : Error {
    using Error::Error;
};
struct UnstableSystem : Error {
    using Error::Error;
};
struct OrderTooLarge : Error {
    using Error::Error;
};
struct PoleAtMappingSingularity : Error {
    using Error::Error;
};
struct InvalidInterval : Error {
    using Error::Error;
};
struct UnstableWeight : Error {
    using Error::Error;
};
struct SynthesisInfeasible : Error {
    using Error::Error;
};
struct RankDeficient : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct AmplitudeGuard : Error {
    using Error::Error;
};
struct NumericalBlowup : Error {
    using Error::Error;
};
struct WindowMisaligned : Error {
    using Error::Error;
};
struct MissingArtifact : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

} // namespace invctl
