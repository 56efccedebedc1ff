#include "setproj/transforms.hpp"

#include <cmath>
#include <numbers>

namespace setproj {

namespace {

// Calls fn(start, stride, len) for every 1D line of `shape` along `axis`.
template <typename Fn>
void for_each_line(const Shape& shape, int axis, Fn&& fn) {
  const Index len = shape.count(axis);
  const Index stride = shape.stride(axis);
  const Index n = shape.size();
  for (Index i = 0; i < n; ++i) {
    if ((i / stride) % len == 0) fn(i, stride, len);
  }
}

template <typename T>
void gather(const std::vector<T>& data, Index start, Index stride, Index len, std::vector<T>& line) {
  line.resize(static_cast<std::size_t>(len));
  for (Index j = 0; j < len; ++j) line[j] = data[start + j * stride];
}

template <typename T>
void scatter(std::vector<T>& data, Index start, Index stride, const std::vector<T>& line) {
  for (std::size_t j = 0; j < line.size(); ++j) data[start + static_cast<Index>(j) * stride] = line[j];
}

void haar_1d(std::vector<double>& a, bool inverse) {
  const Index n = static_cast<Index>(a.size());
  std::vector<Index> lens;
  for (Index len = n; len > 1; len = len / 2 + len % 2) lens.push_back(len);
  const double s = 1.0 / std::numbers::sqrt2;
  std::vector<double> tmp(a.size());
  if (!inverse) {
    for (Index len : lens) {
      const Index half = len / 2;
      const Index approx = half + len % 2;
      for (Index i = 0; i < half; ++i) {
        tmp[i] = (a[2 * i] + a[2 * i + 1]) * s;
        tmp[approx + i] = (a[2 * i] - a[2 * i + 1]) * s;
      }
      if (len % 2) tmp[half] = a[len - 1];
      std::copy(tmp.begin(), tmp.begin() + len, a.begin());
    }
  } else {
    for (auto it = lens.rbegin(); it != lens.rend(); ++it) {
      const Index len = *it;
      const Index half = len / 2;
      const Index approx = half + len % 2;
      for (Index i = 0; i < half; ++i) {
        tmp[2 * i] = (a[i] + a[approx + i]) * s;
        tmp[2 * i + 1] = (a[i] - a[approx + i]) * s;
      }
      if (len % 2) tmp[len - 1] = a[half];
      std::copy(tmp.begin(), tmp.begin() + len, a.begin());
    }
  }
}

}  // namespace

template <typename Real>
void dct_inplace(std::vector<Real>& data, const Shape& shape, bool inverse) {
  std::vector<Real> line;
  std::vector<double> out;
  for (int axis = 0; axis < shape.dims(); ++axis) {
    const Index len = shape.count(axis);
    if (len == 1) continue;
    // table(k, j) = s_k cos(pi (2j + 1) k / (2 len))
    std::vector<double> table(static_cast<std::size_t>(len * len));
    for (Index k = 0; k < len; ++k) {
      const double sk = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(len));
      for (Index j = 0; j < len; ++j) {
        table[k * len + j] =
            sk * std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) / (2.0 * len));
      }
    }
    out.assign(static_cast<std::size_t>(len), 0.0);
    for_each_line(shape, axis, [&](Index start, Index stride, Index n) {
      gather(data, start, stride, n, line);
      for (Index k = 0; k < n; ++k) {
        double acc = 0;
        for (Index j = 0; j < n; ++j) {
          acc += inverse ? table[j * n + k] * line[j] : table[k * n + j] * line[j];
        }
        out[k] = acc;
      }
      for (Index k = 0; k < n; ++k) line[k] = static_cast<Real>(out[k]);
      scatter(data, start, stride, line);
    });
  }
}

template <typename Real>
void dft_inplace(std::vector<std::complex<Real>>& data, const Shape& shape, bool inverse) {
  std::vector<std::complex<Real>> line;
  std::vector<std::complex<double>> out;
  for (int axis = 0; axis < shape.dims(); ++axis) {
    const Index len = shape.count(axis);
    if (len == 1) continue;
    const double sign = inverse ? 1.0 : -1.0;
    const double scale = 1.0 / std::sqrt(static_cast<double>(len));
    std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(len));
    for (Index t = 0; t < len; ++t) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(len);
      twiddle[t] = std::polar(scale, ang);
    }
    out.assign(static_cast<std::size_t>(len), {});
    for_each_line(shape, axis, [&](Index start, Index stride, Index n) {
      gather(data, start, stride, n, line);
      for (Index k = 0; k < n; ++k) {
        std::complex<double> acc{};
        for (Index j = 0; j < n; ++j) {
          acc += twiddle[(k * j) % n] * std::complex<double>(line[j]);
        }
        out[k] = acc;
      }
      for (Index k = 0; k < n; ++k) line[k] = std::complex<Real>(out[k]);
      scatter(data, start, stride, line);
    });
  }
}

template <typename Real>
void haar_inplace(std::vector<Real>& data, const Shape& shape, bool inverse) {
  std::vector<Real> line;
  std::vector<double> work;
  for (int axis = 0; axis < shape.dims(); ++axis) {
    if (shape.count(axis) == 1) continue;
    for_each_line(shape, axis, [&](Index start, Index stride, Index n) {
      gather(data, start, stride, n, line);
      work.assign(line.begin(), line.end());
      haar_1d(work, inverse);
      for (Index k = 0; k < n; ++k) line[k] = static_cast<Real>(work[k]);
      scatter(data, start, stride, line);
    });
  }
}

template void dct_inplace(std::vector<float>&, const Shape&, bool);
template void dct_inplace(std::vector<double>&, const Shape&, bool);
template void dft_inplace(std::vector<std::complex<float>>&, const Shape&, bool);
template void dft_inplace(std::vector<std::complex<double>>&, const Shape&, bool);
template void haar_inplace(std::vector<float>&, const Shape&, bool);
template void haar_inplace(std::vector<double>&, const Shape&, bool);

}  // namespace setproj
