#include "occgrasp/quaternion.hpp"

#include <algorithm>
#include <cmath>

#include "occgrasp/error.hpp"

namespace occgrasp {

Quaternion Quaternion::from_components(double w, double x, double y, double z) {
    const Quaternion q{w, x, y, z};
    const double n = q.norm();
    if (!std::isfinite(n) || n == 0.0) throw InputError("quaternion: zero or non-finite components");
    return q.normalized();
}

Quaternion Quaternion::from_matrix(const Mat3& m) {
    // Shepperd's method: branch on the largest diagonal combination.
    const double trace = m.trace();
    Quaternion q;
    if (trace > 0.0) {
        const double s = 2.0 * std::sqrt(1.0 + trace);
        q = {0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
        q = {(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
    } else if (m(1, 1) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
        q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
        q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s};
    }
    return q.normalized().canonical();
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::canonical() const {
    if (w > 0.0) return *this;
    if (w < 0.0) return -*this;
    // w == 0: fix the sign on the first non-zero vector component.
    if (x != 0.0) return x > 0.0 ? *this : -*this;
    if (y != 0.0) return y > 0.0 ? *this : -*this;
    return z >= 0.0 ? *this : -*this;
}

Vec3 Quaternion::rotate(const Vec3& v) const {
    // v + 2w (u x v) + 2 u x (u x v); every term is even in q, so q and -q agree bitwise.
    const Vec3 u(x, y, z);
    const Vec3 uv = u.cross(v);
    const Vec3 uuv = u.cross(uv);
    return v + 2.0 * (w * uv + uuv);
}

Mat3 Quaternion::to_matrix() const {
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

double Quaternion::angle() const {
    const double s = std::sqrt(x * x + y * y + z * z);
    return 2.0 * std::atan2(s, std::abs(w));
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double dot(const Quaternion& a, const Quaternion& b) {
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

Quaternion quaternion_about_axis(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InputError("quaternion_about_axis: zero axis");
    if (std::abs(n - 1.0) > 1e-6) throw InputError("quaternion_about_axis: axis is not unit length");
    const Vec3 a = axis / n;
    const double s = std::sin(0.5 * angle);
    return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

bool same_rotation(const Quaternion& a, const Quaternion& b, double tol) {
    return rotation_distance(a, b) <= tol;
}

double rotation_distance(const Quaternion& a, const Quaternion& b) {
    return (a.conjugate() * b).angle();
}

}  // namespace occgrasp
