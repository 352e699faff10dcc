#include "neupig/deform_model.hpp"

namespace neupig {

std::string to_string(RotationVariant v) {
  switch (v) {
    case RotationVariant::Quaternion: return "quaternion";
    case RotationVariant::Cayley: return "cayley";
    case RotationVariant::Exponential: return "exponential";
  }
  return "?";
}

RotationVariant parse_rotation(const std::string& s) {
  if (s == "quaternion") return RotationVariant::Quaternion;
  if (s == "cayley") return RotationVariant::Cayley;
  if (s == "exponential") return RotationVariant::Exponential;
  fail(ErrorKind::Parse, "unknown rotation variant '" + s + "'");
}

namespace {

template <typename T>
Mat3<T> skew(const Vec3<T>& v) {
  Mat3<T> S;
  S << T(0), -v.z(), v.y(),
       v.z(), T(0), -v.x(),
       -v.y(), v.x(), T(0);
  return S;
}

// <G, skew(e_k)> for k = 0..2
template <typename T>
Vec3<T> skew_adjoint(const Mat3<T>& G) {
  return {G(2, 1) - G(1, 2), G(0, 2) - G(2, 0), G(1, 0) - G(0, 1)};
}

template <typename T>
Mat3<T> quat_to_matrix(T w, T x, T y, T z) {
  Mat3<T> R;
  R << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
       T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
       T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
  return R;
}

// Rodrigues coefficients a = sin(t)/t, b = (1-cos t)/t^2 and their
// derivatives divided by t: c = a'(t)/t, d = b'(t)/t.
template <typename T>
void rodrigues_coeffs(T theta, T& a, T& b, T& c, T& d) {
  const T t2 = theta * theta;
  // Series below the cancellation-prone range of the closed forms.
  const T cutoff = sizeof(T) == sizeof(float) ? T(0.1) : T(1e-3);
  if (theta < cutoff) {
    a = T(1) - t2 / T(6) + t2 * t2 / T(120);
    b = T(0.5) - t2 / T(24) + t2 * t2 / T(720);
    c = -T(1) / T(3) + t2 / T(30);
    d = -T(1) / T(12) + t2 / T(180);
    return;
  }
  const T s = std::sin(theta);
  const T co = std::cos(theta);
  a = s / theta;
  b = (T(1) - co) / t2;
  c = (theta * co - s) / (t2 * theta);
  d = (theta * s - T(2) * (T(1) - co)) / (t2 * t2);
}

}  // namespace

template <typename T>
Mat3<T> map_rotation(const std::array<T, 4>& q, RotationVariant variant) {
  switch (variant) {
    case RotationVariant::Quaternion: {
      const T w = T(1) + q[0];
      const T n = std::sqrt(w * w + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
      if (!(n >= T(1e-12)))
        fail(ErrorKind::Numeric, "map_rotation: quaternion norm vanishes after offset");
      return quat_to_matrix(w / n, q[1] / n, q[2] / n, q[3] / n);
    }
    case RotationVariant::Cayley: {
      const Mat3<T> S = skew(Vec3<T>(q[1], q[2], q[3]));
      const Mat3<T> I = Mat3<T>::Identity();
      return (I - S).inverse() * (I + S);
    }
    case RotationVariant::Exponential: {
      const Vec3<T> v(q[1], q[2], q[3]);
      const T theta = v.norm();
      T a, b, c, d;
      rodrigues_coeffs(theta, a, b, c, d);
      const Mat3<T> K = skew(v);
      return Mat3<T>::Identity() + a * K + b * K * K;
    }
  }
  return Mat3<T>::Identity();
}

template <typename T>
std::array<T, 4> map_rotation_vjp(const std::array<T, 4>& q, RotationVariant variant,
                                  const Mat3<T>& G) {
  std::array<T, 4> out{T(0), T(0), T(0), T(0)};
  switch (variant) {
    case RotationVariant::Quaternion: {
      const Eigen::Matrix<T, 4, 1> raw(T(1) + q[0], q[1], q[2], q[3]);
      const T n = raw.norm();
      if (!(n >= T(1e-12)))
        fail(ErrorKind::Numeric, "map_rotation: quaternion norm vanishes after offset");
      const Eigen::Matrix<T, 4, 1> u = raw / n;
      const T w = u[0], x = u[1], y = u[2], z = u[3];
      Mat3<T> dw, dx, dy, dz;
      dw << T(0), -z, y, z, T(0), -x, -y, x, T(0);
      dx << T(0), y, z, y, -T(2) * x, -w, z, w, -T(2) * x;
      dy << -T(2) * y, x, w, x, T(0), z, -w, z, -T(2) * y;
      dz << -T(2) * z, -w, x, w, -T(2) * z, y, x, y, T(0);
      Eigen::Matrix<T, 4, 1> g_unit;
      g_unit << T(2) * (G.array() * dw.array()).sum(), T(2) * (G.array() * dx.array()).sum(),
          T(2) * (G.array() * dy.array()).sum(), T(2) * (G.array() * dz.array()).sum();
      // Through the normalization u = raw / |raw|.
      const Eigen::Matrix<T, 4, 1> g_raw = (g_unit - u * u.dot(g_unit)) / n;
      for (int i = 0; i < 4; ++i) out[i] = g_raw[i];
      return out;
    }
    case RotationVariant::Cayley: {
      const Mat3<T> S = skew(Vec3<T>(q[1], q[2], q[3]));
      const Mat3<T> I = Mat3<T>::Identity();
      const Mat3<T> A_inv = (I - S).inverse();
      const Mat3<T> R = A_inv * (I + S);
      // dR = A^-1 dS (R + I)
      const Mat3<T> dS = A_inv.transpose() * G * (R + I).transpose();
      const Vec3<T> g = skew_adjoint(dS);
      out[1] = g.x();
      out[2] = g.y();
      out[3] = g.z();
      return out;
    }
    case RotationVariant::Exponential: {
      const Vec3<T> v(q[1], q[2], q[3]);
      const T theta = v.norm();
      T a, b, c, d;
      rodrigues_coeffs(theta, a, b, c, d);
      const Mat3<T> K = skew(v);
      const Mat3<T> K2 = K * K;
      // R = I + a K + b K^2; dR/dv_k = a E_k + b (E_k K + K E_k) + c v_k K + d v_k K^2
      const T gK = (G.array() * K.array()).sum();
      const T gK2 = (G.array() * K2.array()).sum();
      const Vec3<T> from_a = a * skew_adjoint(G);
      // <G, E_k K + K E_k> = <G K^T + K^T G, E_k>
      const Vec3<T> from_b = b * skew_adjoint(Mat3<T>(G * K.transpose() + K.transpose() * G));
      const Vec3<T> g = from_a + from_b + (c * gK + d * gK2) * v;
      out[1] = g.x();
      out[2] = g.y();
      out[3] = g.z();
      return out;
    }
  }
  return out;
}

template <typename T>
Vec3<T> map_translation(const Vec3<T>& d_raw, T alpha) {
  return (alpha * d_raw).array().tanh().matrix();
}

#define NEUPIG_INSTANTIATE(T)                                                         \
  template Mat3<T> map_rotation(const std::array<T, 4>&, RotationVariant);           \
  template std::array<T, 4> map_rotation_vjp(const std::array<T, 4>&, RotationVariant, \
                                             const Mat3<T>&);                         \
  template Vec3<T> map_translation(const Vec3<T>&, T);

NEUPIG_INSTANTIATE(float)
NEUPIG_INSTANTIATE(double)
#undef NEUPIG_INSTANTIATE

}  // namespace neupig
