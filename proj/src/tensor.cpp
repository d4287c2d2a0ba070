#include "odet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace odet {

namespace {

std::size_t checked_numel(const Dims& dims) {
    std::size_t total = 1;
    for (int d : dims) {
        if (d <= 0) {
            throw ShapeError("tensor dims must be positive, got " + dims_to_string(dims));
        }
        total *= static_cast<std::size_t>(d);
    }
    return total;
}

}  // namespace

Tensor::Tensor(int n, int c, int h, int w) : Tensor(Dims{n, c, h, w}) {}

Tensor::Tensor(Dims dims) : dims_(dims), data_(checked_numel(dims), 0.0) {}

Tensor::Tensor(Dims dims, std::vector<double> values) : dims_(dims), data_(std::move(values)) {
    if (checked_numel(dims) != data_.size()) {
        throw ShapeError("tensor payload size " + std::to_string(data_.size()) +
                         " does not match dims " + dims_to_string(dims));
    }
}

Tensor Tensor::full(Dims dims, double value) {
    Tensor t(dims);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

std::string dims_to_string(const Dims& d) {
    return "(" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]) +
           "," + std::to_string(d[3]) + ")";
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* context) {
    if (!a.same_dims(b)) {
        throw ShapeError(std::string(context) + ": dims mismatch " + dims_to_string(a.dims()) +
                         " vs " + dims_to_string(b.dims()));
    }
}

void require_finite(std::span<const double> values, const char* context) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(context) + ": non-finite value");
        }
    }
}

void require_finite(const Tensor& t, const char* context) {
    require_finite(std::span<const double>(t.vec()), context);
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.vec()) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::fabs(a.vec()[i] - b.vec()[i]));
    }
    return m;
}

double sum_squares(const Tensor& t) {
    double s = 0.0;
    for (double v : t.vec()) s += v * v;
    return s;
}

double inner(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "inner");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.vec()[i] * b.vec()[i];
    return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "add");
    Tensor out(a.dims());
    for (std::size_t i = 0; i < a.numel(); ++i) out.vec()[i] = a.vec()[i] + b.vec()[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "sub");
    Tensor out(a.dims());
    for (std::size_t i = 0; i < a.numel(); ++i) out.vec()[i] = a.vec()[i] - b.vec()[i];
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out(a.dims());
    for (std::size_t i = 0; i < a.numel(); ++i) out.vec()[i] = a.vec()[i] * factor;
    return out;
}

void fill_normal(Tensor& t, std::mt19937_64& rng, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.vec()) v = dist(rng);
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.vec()) v = dist(rng);
}

namespace {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64_le(out, bits);
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

std::uint64_t get_u64_le(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
    return v;
}

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 + 8 * 4 + 8 * t.numel());
    for (char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
    put_u32_le(out, 4);
    for (int d : t.dims()) put_u64_le(out, static_cast<std::uint64_t>(d));
    for (double v : t.vec()) put_f64_le(out, v);
    return out;
}

Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ParseError("bad tensor magic", 0);
    }
    std::uint32_t rank = get_u32_le(bytes, 4);
    if (rank != 4) {
        throw ParseError("unsupported tensor rank " + std::to_string(rank), 0);
    }
    std::size_t pos = 8;
    if (bytes.size() < pos + 8 * rank) throw ParseError("truncated tensor header", 0);
    Dims dims;
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t d = get_u64_le(bytes, pos);
        pos += 8;
        if (d == 0 || d > (1u << 24)) throw ParseError("implausible tensor dim", 0);
        dims[i] = static_cast<int>(d);
        total *= d;
    }
    if (bytes.size() != pos + 8 * total) throw ParseError("tensor payload size mismatch", 0);
    std::vector<double> data(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::uint64_t bits = get_u64_le(bytes, pos + 8 * i);
        std::memcpy(&data[i], &bits, sizeof(double));
    }
    return Tensor(dims, std::move(data));
}

void save_tensor(const Tensor& t, const std::string& path) {
    auto bytes = tensor_to_bytes(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return tensor_from_bytes(bytes);
}

}  // namespace odet
