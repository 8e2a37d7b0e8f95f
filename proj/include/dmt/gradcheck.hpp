#ifndef DMT_GRADCHECK_HPP
#define DMT_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"

namespace dmt {

/**
 * Central finite-difference gradient of a scalar function, used as the
 * independent oracle against analytic gradients.
 *
 * Each coordinate k is perturbed by ±h and the slope (f(p+h e_k) −
 * f(p−h e_k)) / 2h recorded. Throws if any evaluation is non-finite.
 */
inline std::vector<double> finite_diff_gradient(
        const std::function<double(const std::vector<double>&)>& f,
        std::vector<double> p,
        double h) {
    std::vector<double> grad(p.size());
    for (size_t k = 0; k < p.size(); ++k) {
        const double orig = p[k];
        p[k] = orig + h;
        const double fp = f(p);
        p[k] = orig - h;
        const double fm = f(p);
        p[k] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_gradient: non-finite function value");
        }
        grad[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}

#endif
