#pragma once

#include "bandctl/error.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace bandctl::roots {

struct BisectionOptions {
    double xtol = 1e-12;   // required final bracket width, relative to max(1, |x|)
    int max_iter = 200;
};

struct Bracket {
    double lo;
    double hi;
};

/// Bisection on a sign-changing bracket. Iterates until the bracket cannot be
/// split any further in floating point (or the iteration cap is reached), so
/// the returned root is usually accurate to a few ulps rather than just xtol.
/// Throws ConvergenceFailure if the final width exceeds xtol.
template <class F>
double bisect(F&& f, double lo, double hi, const BisectionOptions& opt = {},
              const char* what = "bisection") {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) {
        std::ostringstream os;
        os << what << ": bracket [" << lo << ", " << hi << "] does not change sign (f=" << flo
           << ", " << fhi << ")";
        throw Error(ErrorKind::ConvergenceFailure, os.str());
    }
    const bool increasing = flo < 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (!(mid > lo && mid < hi)) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == increasing)
            lo = mid;
        else
            hi = mid;
    }
    const double x = lo + 0.5 * (hi - lo);
    if (hi - lo > opt.xtol * std::fmax(1.0, std::fabs(x))) {
        std::ostringstream os;
        os << what << ": no convergence after " << opt.max_iter << " iterations, bracket [" << lo
           << ", " << hi << "]";
        throw Error(ErrorKind::ConvergenceFailure, os.str());
    }
    return x;
}

} // namespace bandctl::roots
