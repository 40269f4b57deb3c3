#include <skycompass/encoding.hpp>

#include <cmath>
#include <stdexcept>

#include <skycompass/angles.hpp>

namespace skycompass::encoding {

OrientationDeg::OrientationDeg(double degrees) {
  if (!std::isfinite(degrees)) throw std::invalid_argument("orientation must be finite");
  value_ = wrap_360(degrees);
}

std::string_view to_token(Scheme scheme) {
  switch (scheme) {
    case Scheme::Raw360: return "raw360";
    case Scheme::Norm01: return "norm01";
    case Scheme::OneHot: return "onehot";
    case Scheme::Trig: return "trig";
    case Scheme::Exp: return "exp";
  }
  return "?";
}

Scheme scheme_from_token(std::string_view token) {
  for (Scheme s : {Scheme::Raw360, Scheme::Norm01, Scheme::OneHot, Scheme::Trig, Scheme::Exp})
    if (to_token(s) == token) return s;
  throw std::invalid_argument("unknown encoding scheme '" + std::string(token) + "'");
}

void EncodingSpec::validate() const {
  if (!(j_deg > 0.0) || !std::isfinite(j_deg)) throw std::invalid_argument("j must be positive");
  const double n = 360.0 / j_deg;
  if (std::round(n) < 1.0 || std::fabs(n - std::round(n)) > 1e-9 * n)
    throw std::invalid_argument("360/j must be a positive integer");
  if (scheme == Scheme::Exp && !(m > 0.0 && m < 1.0)) throw std::invalid_argument("m must lie in (0, 1)");
}

int EncodingSpec::neuron_count() const { return static_cast<int>(std::lround(360.0 / j_deg)); }

int nearest_neuron(OrientationDeg phi, const EncodingSpec& spec) {
  const int n = spec.neuron_count();
  const long k = std::lround(phi.value() / spec.j_deg);
  return static_cast<int>(((k % n) + n) % n);
}

int circular_offset(int k, int center, int n) {
  int d = ((k - center) % n + n) % n;  // [0, n)
  if (2 * d > n) d -= n;
  return d;
}

CodeVector encode(OrientationDeg phi, const EncodingSpec& spec) {
  spec.validate();
  switch (spec.scheme) {
    case Scheme::Raw360: return CodeVector::Constant(1, phi.value());
    case Scheme::Norm01: return CodeVector::Constant(1, phi.value() / 360.0);
    default: break;
  }

  const int n = spec.neuron_count();
  const int center = nearest_neuron(phi, spec);
  CodeVector code = CodeVector::Zero(n);
  for (int k = 0; k < n; ++k) {
    const int i = circular_offset(k, center, n);
    switch (spec.scheme) {
      case Scheme::OneHot: code(k) = i == 0 ? 1.0 : 0.0; break;
      case Scheme::Trig: {
        // Window -90/j < i < 90/j keeps every active neuron strictly positive.
        const bool active = std::abs(i) < 90.0 / spec.j_deg - 1e-9;
        code(k) = active ? std::cos(deg_to_rad(std::abs(i) * spec.j_deg)) : 0.0;
        break;
      }
      case Scheme::Exp: code(k) = std::pow(spec.m, std::abs(i)); break;
      default: break;
    }
  }
  return code;
}

OrientationDeg decode(const CodeVector& code, const EncodingSpec& spec) {
  if (code.size() == 0) throw std::invalid_argument("decode: empty code");
  if (code.size() != spec.size()) throw std::invalid_argument("decode: code length does not match spec");
  switch (spec.scheme) {
    case Scheme::Raw360: return OrientationDeg(code(0));
    case Scheme::Norm01: return OrientationDeg(code(0) * 360.0);
    default: break;
  }
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < code.size(); ++k)
    if (code(k) > code(best)) best = k;
  return OrientationDeg(static_cast<double>(best) * spec.j_deg);
}

double loss(const CodeVector& prediction, const CodeVector& target) {
  if (prediction.size() != target.size()) throw std::invalid_argument("loss: length mismatch");
  return (prediction - target).squaredNorm();
}

double angular_error(OrientationDeg predicted, OrientationDeg truth) {
  const double d = wrap_360(predicted.value() - truth.value());
  return std::min(d, 360.0 - d);
}

double fold_error_180(double error_deg) {
  if (!(error_deg >= 0.0 && error_deg <= 180.0))
    throw std::invalid_argument("fold_error_180: error must lie in [0, 180]");
  return error_deg <= 90.0 ? error_deg : std::fabs(error_deg - 180.0);
}

}  // namespace skycompass::encoding
