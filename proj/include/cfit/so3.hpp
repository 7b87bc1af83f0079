#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

/**
 * @file so3.hpp
 * @brief Rotation algebra: unit quaternions, Modified Rodrigues Parameters (MRPs),
 *        rotation matrices, exp/log maps and the SO(3) Jacobians used by the filter.
 *
 * Conventions
 * -----------
 *  - Hamilton quaternions, scalar first when written out (w, x, y, z).
 *  - q^{NI} (and R^{NI}) maps a vector expressed in the IMU frame into the navigation
 *    frame: v^N = R^{NI} v^I.
 *  - quatExp/quatLog work on the *half-angle* vector: quatExp(v) rotates by 2|v| about v.
 *    Rotation vectors (full angle) are 2 * quatLog(q).
 *  - MRP chi = e * tan(theta / 4). Quaternions are canonicalized to w >= 0 before
 *    conversion, which keeps |chi| <= 1 (the shadow set is never stored).
 */

namespace cfit {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Quaternion = Eigen::Quaternion<Scalar>;

using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Quat = Quaternion<double>;

// Below this norm the closed forms are replaced by series expansions.
template <typename Scalar>
constexpr Scalar kSmallAngle = Scalar(1e-12);

/// Skew-symmetric matrix with crossMatrix(a) * b == a.cross(b).
template <typename Derived>
Matrix3<typename Derived::Scalar> crossMatrix(const Eigen::MatrixBase<Derived>& a)
{
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  m << Scalar(0), -a(2), a(1),
       a(2), Scalar(0), -a(0),
       -a(1), a(0), Scalar(0);
  return m;
}

/// Flips q onto the w >= 0 hemisphere (same rotation).
template <typename Scalar>
Quaternion<Scalar> canonicalize(const Quaternion<Scalar>& q)
{
  if (q.w() < Scalar(0)) {
    return Quaternion<Scalar>(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

template <typename Derived>
Quaternion<typename Derived::Scalar> quatFromMrp(const Eigen::MatrixBase<Derived>& chi)
{
  using Scalar = typename Derived::Scalar;
  const Scalar s = chi.squaredNorm();
  const Scalar denom = Scalar(1) + s;
  Quaternion<Scalar> q;
  q.w() = (Scalar(1) - s) / denom;
  q.vec() = Scalar(2) * chi / denom;
  q.normalize();
  return q;
}

template <typename Scalar>
Vector3<Scalar> mrpFromQuat(const Quaternion<Scalar>& q_in)
{
  const Quaternion<Scalar> q = canonicalize(q_in.normalized());
  return q.vec() / (Scalar(1) + q.w());
}

/// Shadow MRP -chi/|chi|^2, describing the same rotation. Undefined for chi == 0.
template <typename Derived>
Vector3<typename Derived::Scalar> mrpShadow(const Eigen::MatrixBase<Derived>& chi)
{
  return -chi / chi.squaredNorm();
}

/// Switches to the shadow set when |chi| > 1.
template <typename Derived>
Vector3<typename Derived::Scalar> mrpNormalize(const Eigen::MatrixBase<Derived>& chi)
{
  using Scalar = typename Derived::Scalar;
  if (chi.squaredNorm() > Scalar(1)) {
    return mrpShadow(chi);
  }
  return chi;
}

template <typename Scalar>
Quaternion<Scalar> quatMultiply(const Quaternion<Scalar>& a, const Quaternion<Scalar>& b)
{
  return (a * b).normalized();
}

/// exp of the pure quaternion (0, v): rotation of angle 2|v| about v/|v|.
template <typename Derived>
Quaternion<typename Derived::Scalar> quatExp(const Eigen::MatrixBase<Derived>& v)
{
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  Quaternion<Scalar> q;
  if (n < kSmallAngle<Scalar>) {
    const Scalar n2 = n * n;
    q.w() = Scalar(1) - n2 / Scalar(2);
    q.vec() = v * (Scalar(1) - n2 / Scalar(6));
  } else {
    q.w() = std::cos(n);
    q.vec() = v * (std::sin(n) / n);
  }
  q.normalize();
  return q;
}

/// Principal logarithm; returns the half-angle vector with |result| <= pi/2.
template <typename Scalar>
Vector3<Scalar> quatLog(const Quaternion<Scalar>& q_in)
{
  const Quaternion<Scalar> q = canonicalize(q_in.normalized());
  const Scalar n = q.vec().norm();
  if (n < kSmallAngle<Scalar>) {
    // atan2(n, w) / n = (1 - n^2 / (3 w^2)) / w + O(n^4)
    const Scalar w = q.w();
    return q.vec() * ((Scalar(1) - n * n / (Scalar(3) * w * w)) / w);
  }
  return q.vec() * (std::atan2(n, q.w()) / n);
}

/// Quaternion of the rotation vector phi (angle |phi|).
template <typename Derived>
Quaternion<typename Derived::Scalar> quatFromRotationVector(const Eigen::MatrixBase<Derived>& phi)
{
  using Scalar = typename Derived::Scalar;
  return quatExp(phi / Scalar(2));
}

template <typename Scalar>
Vector3<Scalar> rotationVectorFromQuat(const Quaternion<Scalar>& q)
{
  return Scalar(2) * quatLog(q);
}

/// Rotation angle in [0, pi].
template <typename Derived>
typename Derived::Scalar rotationAngle(const Eigen::MatrixBase<Derived>& R)
{
  using Scalar = typename Derived::Scalar;
  const Scalar c = std::clamp((R.trace() - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
  const Vector3<Scalar> axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const Scalar s = std::clamp(axis.norm() / Scalar(2), Scalar(0), Scalar(1));
  // atan2 keeps full precision near 0 and pi, where acos alone does not.
  return std::atan2(s, c);
}

template <typename Scalar>
Matrix3<Scalar> rotationMatrix(const Quaternion<Scalar>& q)
{
  return q.normalized().toRotationMatrix();
}

template <typename Derived>
Matrix3<typename Derived::Scalar> rotationFromMrp(const Eigen::MatrixBase<Derived>& chi)
{
  return rotationMatrix(quatFromMrp(chi));
}

/**
 * Right Jacobian of SO(3): Exp(phi + d) ~= Exp(phi) Exp(rightJacobian(phi) d).
 */
template <typename Derived>
Matrix3<typename Derived::Scalar> rightJacobian(const Eigen::MatrixBase<Derived>& phi)
{
  using Scalar = typename Derived::Scalar;
  const Scalar theta = phi.norm();
  const Matrix3<Scalar> K = crossMatrix(phi);
  if (theta < Scalar(1e-6)) {
    return Matrix3<Scalar>::Identity() - K / Scalar(2) + K * K / Scalar(6);
  }
  const Scalar t2 = theta * theta;
  return Matrix3<Scalar>::Identity() - (Scalar(1) - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

/**
 * Inverse of the left Jacobian of SO(3):
 * Log(Exp(d) Exp(phi)) ~= phi + leftJacobianInverse(phi) d.
 */
template <typename Derived>
Matrix3<typename Derived::Scalar> leftJacobianInverse(const Eigen::MatrixBase<Derived>& phi)
{
  using Scalar = typename Derived::Scalar;
  const Scalar theta = phi.norm();
  const Matrix3<Scalar> K = crossMatrix(phi);
  if (theta < Scalar(1e-6)) {
    return Matrix3<Scalar>::Identity() - K / Scalar(2) + K * K / Scalar(12);
  }
  const Scalar coeff =
      Scalar(1) / (theta * theta) - (Scalar(1) + std::cos(theta)) / (Scalar(2) * theta * std::sin(theta));
  return Matrix3<Scalar>::Identity() - K / Scalar(2) + coeff * K * K;
}

/**
 * d/dd chi(q(a) * q(d)) at d = 0, where a = chi is the current MRP.
 * Equals the MRP kinematics matrix (1 - |a|^2) I + 2 [a x] + 2 a a^T, scaled so that
 * a body-frame MRP perturbation (rotation vector ~ 4 d) maps to chi-space.
 */
template <typename Derived>
Matrix3<typename Derived::Scalar> mrpRightComposeJacobian(const Eigen::MatrixBase<Derived>& chi)
{
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) - chi.squaredNorm()) * Matrix3<Scalar>::Identity() + Scalar(2) * crossMatrix(chi) +
         Scalar(2) * chi * chi.transpose();
}

}  // namespace cfit
