#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace radfuse {

// Every failure the library reports is an Error; callers that need to tell
// recoverable per-view failures apart catch the narrower types.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a view has no tissue left after periphery removal.
class EmptyInteriorError : public Error {
public:
    using Error::Error;
};

// Raised when a learner or calibrator is asked to train on one class only.
class SingleClassError : public Error {
public:
    using Error::Error;
};

enum class Laterality { Left, Right };
enum class ViewKind { CC, MLO };

inline char to_char(Laterality l) { return l == Laterality::Left ? 'L' : 'R'; }
inline std::string to_string(ViewKind v) { return v == ViewKind::CC ? "CC" : "MLO"; }

inline Laterality parse_laterality(std::string_view s) {
    if (s == "L") return Laterality::Left;
    if (s == "R") return Laterality::Right;
    throw Error("laterality must be L or R, got '" + std::string(s) + "'");
}

inline ViewKind parse_view_kind(std::string_view s) {
    if (s == "CC") return ViewKind::CC;
    if (s == "MLO") return ViewKind::MLO;
    throw Error("view must be CC or MLO, got '" + std::string(s) + "'");
}

struct ViewMeta {
    Laterality laterality = Laterality::Right;
    ViewKind view_kind = ViewKind::CC;
    double age_years = 0.0;
    int year = 0;
};

// Row-major 2-D grid with isotropic physical spacing.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(int w, int h) const { return w == width && h == height; }
    template <typename U>
    bool same_shape(const Grid<U>& o) const { return o.width == width && o.height == height; }
};

struct Image : Grid<double> {
    double spacing_mm = 0.1;

    Image() = default;
    Image(int w, int h, double spacing, double fill = 0.0) : Grid<double>(w, h, fill), spacing_mm(spacing) {}

    static Image from_rows(const std::vector<std::vector<double>>& rows, double spacing = 0.1) {
        Image img(rows.empty() ? 0 : static_cast<int>(rows.front().size()), static_cast<int>(rows.size()), spacing);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) img(x, y) = rows[y][x];
        return img;
    }
};

// Binary membership grid; uint8_t keeps storage contiguous unlike vector<bool>.
struct Mask : Grid<std::uint8_t> {
    Mask() = default;
    Mask(int w, int h, bool fill = false) : Grid<std::uint8_t>(w, h, fill ? 1 : 0) {}

    std::size_t count() const {
        return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t b) { return b != 0; }));
    }
    bool any() const { return std::any_of(data.begin(), data.end(), [](std::uint8_t b) { return b != 0; }); }
};

using DistanceMap = Grid<double>;

// Append-only, thread-safe diagnostic channel. Ordering across threads is not
// guaranteed; readers sort if they need a stable view.
class RunLog {
public:
    void add(std::string entry) {
        std::lock_guard lock(mutex_);
        entries_.push_back(std::move(entry));
    }
    std::vector<std::string> entries() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }
    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<std::string> entries_;
};

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// Counter-based seed derivation: the same (master, stream, index) triple
// always yields the same seed, independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
    return mix64(mix64(master ^ hash_tag(stream)) + mix64(index + 0x632be59bd9b4e019ULL));
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is claimed through an
// atomic counter, so callers must write results into pre-sized slots.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace radfuse
