#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "core/tensor.hpp"

namespace pgtest {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("pgtest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline pg::Tensor random_tensor(pg::Shape shape, std::mt19937_64& rng, bool grad = true) {
    const auto n = pg::shape_numel(shape);
    return pg::Tensor(std::move(shape), random_values(n, rng), grad);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

// Builds the scalar loss from the leaves, returns the largest elementwise
// relative error between tape gradients and central differences.
inline double max_fd_error(std::vector<pg::Tensor> leaves, const std::function<pg::Tensor()>& loss, double h = 1e-4,
                           double abs_floor = 1e-7) {
    for (auto& l : leaves) l.zero_grad();
    {
        pg::Tape tape;
        pg::TapeScope scope(tape);
        tape.backward(loss());
    }
    double worst = 0.0;
    for (auto& leaf : leaves) {
        std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
        auto data = leaf.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double keep = data[i];
            data[i] = keep + h;
            const double up = loss().item();
            data[i] = keep - h;
            const double down = loss().item();
            data[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            if (std::abs(numeric - analytic[i]) < abs_floor) continue;
            worst = std::max(worst, rel_err(numeric, analytic[i]));
        }
    }
    return worst;
}

}  // namespace pgtest
