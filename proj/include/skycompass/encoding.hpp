#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

/// Orientation output encodings, their decoders, the squared-error loss and
/// angular error metrics.
namespace skycompass::encoding {

/// Heading in degrees, normalized into [0, 360).
class OrientationDeg {
 public:
  OrientationDeg() = default;
  explicit OrientationDeg(double degrees);

  double value() const { return value_; }
  bool operator==(const OrientationDeg&) const = default;

 private:
  double value_ = 0.0;
};

enum class Scheme { Raw360, Norm01, OneHot, Trig, Exp };

/// CLI tokens: raw360, norm01, onehot, trig, exp.
std::string_view to_token(Scheme scheme);
Scheme scheme_from_token(std::string_view token);

struct EncodingSpec {
  Scheme scheme = Scheme::Exp;
  double j_deg = 1.0;  // degrees per output neuron
  double m = 0.98;     // exponential base, Exp only

  /// Throws std::invalid_argument unless 360/j is a positive integer and 0 < m < 1.
  void validate() const;

  bool is_vector() const { return scheme == Scheme::OneHot || scheme == Scheme::Trig || scheme == Scheme::Exp; }
  int neuron_count() const;
  /// Output width: neuron_count() for vector schemes, 1 otherwise.
  int size() const { return is_vector() ? neuron_count() : 1; }

  bool operator==(const EncodingSpec&) const = default;
};

using CodeVector = Eigen::VectorXd;

/// Index of the grid neuron nearest to `phi`.
int nearest_neuron(OrientationDeg phi, const EncodingSpec& spec);

/// Signed circular offset from `center` to `k`, in (-n/2, n/2].
int circular_offset(int k, int center, int n);

CodeVector encode(OrientationDeg phi, const EncodingSpec& spec);

/// Argmax decoding for vector schemes (ties to the lowest index).
OrientationDeg decode(const CodeVector& code, const EncodingSpec& spec);

/// Sum of squared componentwise differences.
double loss(const CodeVector& prediction, const CodeVector& target);

/// Shortest distance on the circle, in [0, 180].
double angular_error(OrientationDeg predicted, OrientationDeg truth);

/// Maps an error in [0, 180] onto [0, 90] for axis-only (0-180) comparison.
double fold_error_180(double error_deg);

}  // namespace skycompass::encoding
