#pragma once

#include <Eigen/Dense>

namespace occgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion (w, x, y, z) representing a rotation in SO(3).
/// q and -q describe the same rotation; canonical() picks the w >= 0 member.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion identity() { return {}; }

    /// Builds and normalizes; throws InputError on a zero or non-finite input.
    static Quaternion from_components(double w, double x, double y, double z);
    static Quaternion from_matrix(const Mat3& m);

    double norm() const;
    Quaternion normalized() const;
    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Quaternion inverse() const { return conjugate(); }
    Quaternion operator-() const { return {-w, -x, -y, -z}; }
    Quaternion canonical() const;

    Vec3 rotate(const Vec3& v) const;
    Mat3 to_matrix() const;

    /// Rotation angle in [0, pi].
    double angle() const;
};

Quaternion operator*(const Quaternion& a, const Quaternion& b);

/// Four-component inner product (sign-sensitive).
double dot(const Quaternion& a, const Quaternion& b);

/// Rotation about a unit axis; throws InputError for a zero or non-unit axis.
Quaternion quaternion_about_axis(const Vec3& axis, double angle);

/// Equality as rotations: treats q and -q as equal.
bool same_rotation(const Quaternion& a, const Quaternion& b, double tol = 1e-9);

/// Angle of the relative rotation a^-1 b, in [0, pi].
double rotation_distance(const Quaternion& a, const Quaternion& b);

}  // namespace occgrasp
