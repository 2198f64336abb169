#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mse {

using cplx = std::complex<double>;

/// Dense n-dimensional array, row-major.
template <typename T>
struct NdArray {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    NdArray() = default;
    explicit NdArray(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(size_from_shape(shape), T{});
    }

    static std::size_t size_from_shape(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
};

using RealArray = NdArray<double>;
using ComplexArray = NdArray<cplx>;

namespace detail {

inline void write_le64(std::ostream& os, const double* p, std::size_t count) {
    // Assumes little-endian host; static_assert below guards the build.
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

inline void read_le64(std::istream& is, double* p, std::size_t count) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("mse: truncated array payload");
}

}  // namespace detail

// Container format: ASCII header line
//   MSEARR v1 <dtype> <ndim> <shape...>
// terminated by '\n', then little-endian float64 payload. Complex values are
// stored interleaved (re, im).

inline void save_array(const std::string& path, const RealArray& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("mse: cannot open " + path);
    os << "MSEARR v1 f64 " << a.shape.size();
    for (auto s : a.shape) os << ' ' << s;
    os << '\n';
    detail::write_le64(os, a.data.data(), a.data.size());
}

inline void save_array(const std::string& path, const ComplexArray& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("mse: cannot open " + path);
    os << "MSEARR v1 c128 " << a.shape.size();
    for (auto s : a.shape) os << ' ' << s;
    os << '\n';
    detail::write_le64(os, reinterpret_cast<const double*>(a.data.data()), 2 * a.data.size());
}

struct ArrayHeader {
    std::string dtype;
    std::vector<std::size_t> shape;
};

inline ArrayHeader read_array_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("mse: missing array header");
    std::istringstream hs(line);
    std::string magic, ver;
    ArrayHeader h;
    std::size_t ndim = 0;
    hs >> magic >> ver >> h.dtype >> ndim;
    if (magic != "MSEARR" || ver != "v1") throw std::runtime_error("mse: bad array magic: " + line);
    if (h.dtype != "f64" && h.dtype != "c128") throw std::runtime_error("mse: bad dtype " + h.dtype);
    h.shape.resize(ndim);
    for (auto& s : h.shape) {
        if (!(hs >> s)) throw std::runtime_error("mse: bad array shape");
    }
    return h;
}

inline RealArray load_real_array(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("mse: cannot open " + path);
    auto h = read_array_header(is);
    if (h.dtype != "f64") throw std::runtime_error("mse: expected f64 array in " + path);
    RealArray a(h.shape);
    detail::read_le64(is, a.data.data(), a.data.size());
    return a;
}

inline ComplexArray load_complex_array(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("mse: cannot open " + path);
    auto h = read_array_header(is);
    if (h.dtype != "c128") throw std::runtime_error("mse: expected c128 array in " + path);
    ComplexArray a(h.shape);
    detail::read_le64(is, reinterpret_cast<double*>(a.data.data()), 2 * a.data.size());
    return a;
}

}  // namespace mse
