#pragma once

#include "stylecap/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace test_util {

using stylecap::TensorRef;
using stylecap::Vec;

// Central finite difference of `loss` w.r.t. value[idx].
inline double fd_grad(double* value, const std::function<double()>& loss, double h = 1e-5) {
    const double saved = *value;
    *value = saved + h;
    const double up = loss();
    *value = saved - h;
    const double down = loss();
    *value = saved;
    return (up - down) / (2.0 * h);
}

// rel err = |a - b| / max(|a|, |b|, floor); the floor guards near-zero pairs.
inline double rel_err(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;
    int checked = 0;
};

// Checks a sample of entries of every tensor: all entries of small tensors,
// `per_tensor` deterministic picks of large ones. `loss` must be a pure
// function of the parameter values; `grads` must already hold the analytic
// gradient for the current values.
inline GradCheckReport grad_check(std::vector<TensorRef>& refs,
                                  const std::function<double()>& loss, int per_tensor = 12,
                                  double h = 1e-5) {
    GradCheckReport rep;
    std::uint64_t pick = 0x9e3779b97f4a7c15ULL;
    for (auto& r : refs) {
        std::vector<std::ptrdiff_t> idx;
        if (r.size <= per_tensor) {
            for (std::ptrdiff_t i = 0; i < r.size; ++i) idx.push_back(i);
        } else {
            for (int k = 0; k < per_tensor; ++k) {
                pick = pick * 6364136223846793005ULL + 1442695040888963407ULL;
                idx.push_back(static_cast<std::ptrdiff_t>(pick % r.size));
            }
        }
        for (auto i : idx) {
            const double fd = fd_grad(r.value + i, loss, h);
            const double an = r.grad[i];
            const double e = rel_err(an, fd);
            ++rep.checked;
            if (e > rep.max_rel_err) {
                rep.max_rel_err = e;
                rep.worst = r.name + "[" + std::to_string(i) + "] analytic=" +
                            std::to_string(an) + " fd=" + std::to_string(fd);
            }
        }
    }
    return rep;
}

}  // namespace test_util
