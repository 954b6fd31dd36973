#pragma once

#include <Eigen/Dense>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse::learners {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowRef = Eigen::Ref<const Vector>;

inline constexpr double kScalerFloor = 1e-8;
// Scaled inputs are clamped to this box so no learner sees overflow.
inline constexpr double kScaledClamp = 1e6;

inline double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double clamp_probability(double p) {
    if (std::isnan(p)) return 0.5;
    return std::clamp(p, 0.0, 1.0);
}

inline void require_both_classes(std::span<const int> y, const char* who) {
    std::size_t pos = 0;
    for (int v : y) pos += v == 1;
    if (pos == 0 || pos == y.size()) throw SingleClassError(std::string(who) + ": both classes are required for training");
}

// Per-feature z-scoring fitted on the training split only.
struct Scaler {
    Vector mean;
    Vector stdev;

    static Scaler fit(const Matrix& x) {
        if (x.rows() == 0) throw Error("fit_scaler: empty training set");
        Scaler s;
        const double n = static_cast<double>(x.rows());
        s.mean = x.colwise().sum().transpose() / n;
        s.stdev.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
            s.stdev(j) = std::max(std::sqrt(var), kScalerFloor);
        }
        return s;
    }

    Vector apply(const RowRef& row) const {
        Vector z = ((row - mean).array() / stdev.array()).matrix();
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = std::clamp(z(j), -kScaledClamp, kScaledClamp);
        return z;
    }

    Matrix apply_rows(const Matrix& x) const {
        Matrix out(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = apply(Vector(x.row(i).transpose())).transpose();
        return out;
    }
};

struct Dataset {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> patient_id;
    std::vector<int> year;

    Eigen::Index rows() const { return x.rows(); }
};

// ---------------------------------------------------------------------------
// Text bundle I/O. Doubles are written as C99 hex floats so a round trip is exact.

class BundleWriter {
public:
    explicit BundleWriter(std::ostream& out) : out_(out) {}

    void put(const std::string& key, double v) { out_ << key << ' ' << hex(v) << '\n'; }
    void put_int(const std::string& key, std::int64_t v) { out_ << key << ' ' << v << '\n'; }
    void put_u64(const std::string& key, std::uint64_t v) { out_ << key << ' ' << v << '\n'; }
    void put_text(const std::string& key, const std::string& v) { out_ << key << ' ' << v << '\n'; }

    void put_vector(const std::string& key, std::span<const double> v) {
        out_ << key << ' ' << v.size();
        for (double d : v) out_ << ' ' << hex(d);
        out_ << '\n';
    }
    void put_vector(const std::string& key, const Vector& v) { put_vector(key, std::span<const double>(v.data(), v.size())); }

    void put_ints(const std::string& key, std::span<const int> v) {
        out_ << key << ' ' << v.size();
        for (int d : v) out_ << ' ' << d;
        out_ << '\n';
    }

    void put_matrix(const std::string& key, const Matrix& m) {
        out_ << key << ' ' << m.rows() << ' ' << m.cols();
        for (Eigen::Index i = 0; i < m.size(); ++i) out_ << ' ' << hex(m.data()[i]);
        out_ << '\n';
    }

private:
    static std::string hex(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%a", v);
        return buf;
    }
    std::ostream& out_;
};

class BundleReader {
public:
    explicit BundleReader(std::istream& in) : in_(in) {}

    double get(const std::string& key) { return parse_double(expect(key)); }
    std::int64_t get_int(const std::string& key) { return std::stoll(expect(key)); }
    std::uint64_t get_u64(const std::string& key) { return std::stoull(expect(key)); }
    std::string get_text(const std::string& key) { return expect(key); }

    std::vector<double> get_doubles(const std::string& key) {
        std::istringstream ss(expect(key));
        std::size_t n = 0;
        ss >> n;
        std::vector<double> v(n);
        std::string tok;
        for (auto& d : v) {
            if (!(ss >> tok)) throw Error("bundle: truncated vector '" + key + "'");
            d = parse_double(tok);
        }
        return v;
    }
    Vector get_vector(const std::string& key) {
        auto v = get_doubles(key);
        return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    std::vector<int> get_ints(const std::string& key) {
        std::istringstream ss(expect(key));
        std::size_t n = 0;
        ss >> n;
        std::vector<int> v(n);
        for (auto& d : v)
            if (!(ss >> d)) throw Error("bundle: truncated int vector '" + key + "'");
        return v;
    }
    Matrix get_matrix(const std::string& key) {
        std::istringstream ss(expect(key));
        Eigen::Index r = 0, c = 0;
        ss >> r >> c;
        Matrix m(r, c);
        std::string tok;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (!(ss >> tok)) throw Error("bundle: truncated matrix '" + key + "'");
            m.data()[i] = parse_double(tok);
        }
        return m;
    }

private:
    std::string expect(const std::string& key) {
        std::string line;
        if (!std::getline(in_, line)) throw Error("bundle: unexpected end, wanted '" + key + "'");
        const auto space = line.find(' ');
        const std::string found = line.substr(0, space);
        if (found != key) throw Error("bundle: expected '" + key + "', found '" + found + "'");
        return space == std::string::npos ? std::string() : line.substr(space + 1);
    }
    static double parse_double(const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str()) throw Error("bundle: bad number '" + s + "'");
        return v;
    }
    std::istream& in_;
};

}  // namespace radfuse::learners
