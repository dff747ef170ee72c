#pragma once

#include <stdexcept>
#include <string>

namespace pacecurve {

// Base for all toolkit errors so callers can catch one type at the CLI
// boundary and map it to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- ingest ----
struct EmptyFile : Error {
  EmptyFile() : Error("EmptyFile: no data rows") {}
};
struct MalformedHeader : Error {
  explicit MalformedHeader(const std::string& what)
      : Error("MalformedHeader: " + what) {}
};
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& where)
      : Error("EmptyInput: " + where) {}
};
struct GridMismatch : Error {
  GridMismatch() : Error("GridMismatch: profiles do not share a grid") {}
};

// ---- fbasis ----
struct TooManyBasisFunctions : Error {
  TooManyBasisFunctions(int n_basis, int n_points)
      : Error("TooManyBasisFunctions: n_basis=" + std::to_string(n_basis) +
              " exceeds " + std::to_string(n_points) + " grid points") {}
};
struct SingularDesign : Error {
  SingularDesign() : Error("SingularDesign: basis evaluations are collinear") {}
};
struct OutOfDomain : Error {
  explicit OutOfDomain(double x)
      : Error("OutOfDomain: x=" + std::to_string(x)) {}
};

// ---- fpca ----
struct InsufficientData : Error {
  explicit InsufficientData(const std::string& what)
      : Error("InsufficientData: " + what) {}
};
struct NonPsdCovariance : Error {
  explicit NonPsdCovariance(double eig)
      : Error("NonPsdCovariance: eigenvalue " + std::to_string(eig) +
              " below -1e-10") {}
};
struct BasisMismatch : Error {
  BasisMismatch() : Error("BasisMismatch: profile and model bases differ") {}
};
struct DegenerateData : Error {
  DegenerateData()
      : Error("DegenerateData: total variance below 1e-14 but components "
              "were requested") {}
};

// ---- hmm ----
struct DegenerateState : Error {
  explicit DegenerateState(int state)
      : Error("DegenerateState: state " + std::to_string(state + 1) +
              " has responsibility mass < 1e-6") {}
};
struct SingularMStep : Error {
  explicit SingularMStep(const std::string& what)
      : Error("SingularMStep: " + what) {}
};
struct UnknownCovariateLevel : Error {
  explicit UnknownCovariateLevel(const std::string& level)
      : Error("UnknownCovariateLevel: " + level) {}
};
struct NumericalUnderflow : Error {
  explicit NumericalUnderflow(const std::string& where)
      : Error("NumericalUnderflow: " + where) {}
};

// ---- synth / cli ----
struct IoError : Error {
  explicit IoError(const std::string& what) : Error("IoError: " + what) {}
};
struct SpecValidation : Error {
  explicit SpecValidation(const std::string& field, const std::string& what)
      : Error("SpecValidation: " + field + ": " + what) {}
};

}  // namespace pacecurve
