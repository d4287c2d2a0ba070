#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace odet {

// Error taxonomy shared across the library.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_number)
        : std::runtime_error(msg + " (line " + std::to_string(line_number) + ")"),
          line(line_number) {}
    int line;
};

using Dims = std::array<int, 4>;  // (N, C, H, W)

// Dense rank-4 tensor, double precision, row-major with N outermost.
class Tensor {
  public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w);
    explicit Tensor(Dims dims);
    Tensor(Dims dims, std::vector<double> values);

    static Tensor zeros(Dims dims) { return Tensor(dims); }
    static Tensor full(Dims dims, double value);

    const Dims& dims() const { return dims_; }
    int n() const { return dims_[0]; }
    int c() const { return dims_[1]; }
    int h() const { return dims_[2]; }
    int w() const { return dims_[3]; }
    std::size_t numel() const { return data_.size(); }
    bool defined() const { return !data_.empty(); }

    double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
    }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

  private:
    Dims dims_{0, 0, 0, 0};
    std::vector<double> data_;
};

std::string dims_to_string(const Dims& d);

// Throws ShapeError unless both tensors share dims.
void require_same_dims(const Tensor& a, const Tensor& b, const char* context);

// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const Tensor& t, const char* context);
void require_finite(std::span<const double> values, const char* context);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& t);
double inner(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

void fill_normal(Tensor& t, std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0);
void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);

// Golden-file format: magic "TNSR", rank as u32 LE, dims as u64 LE, payload as f64 LE.
std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(std::span<const std::uint8_t> bytes);
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

}  // namespace odet
