#pragma once

#include <stdexcept>
#include <string>

namespace dirreg {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyShape : Error { using Error::Error; };
struct DegenerateShape : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct InvalidConcentration : Error { using Error::Error; };
struct InvalidDimension : Error { using Error::Error; };
struct DegenerateKernel : Error { using Error::Error; };
struct MissingNormals : Error { using Error::Error; };
struct SingularJacobian : Error { using Error::Error; };
struct FamilyMismatch : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };
struct DegenerateCurve : Error { using Error::Error; };
struct IsolatedVertex : Error { using Error::Error; };
struct InsufficientPoints : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };
struct ScheduleExhausted : Error { using Error::Error; };
struct InvalidFraction : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };

}  // namespace dirreg
