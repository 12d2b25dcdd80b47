#include "stvf/noise.hpp"

#include <cmath>
#include <cstring>
#include <ostream>
#include <stdexcept>

namespace stvf {

namespace {

// Philox2x64-10 (Salmon et al. constants): 128-bit counter, 64-bit key.
inline void philox_round(std::uint64_t& x0, std::uint64_t& x1, std::uint64_t key) {
    constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ULL;
    const unsigned __int128 prod = static_cast<unsigned __int128>(kMul) * x0;
    const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
    const std::uint64_t lo = static_cast<std::uint64_t>(prod);
    x0 = hi ^ key ^ x1;
    x1 = lo;
}

inline std::uint64_t philox2x64(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) {
    constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
    std::uint64_t x0 = c0, x1 = c1, k = key;
    for (int round = 0; round < 10; ++round) {
        philox_round(x0, x1, k);
        k += kWeyl;
    }
    return x0;
}

}  // namespace

double counter_uniform(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
    const std::uint64_t bits = philox2x64(key, ctr_hi, ctr_lo);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double normal_inverse_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_inverse_cdf: p must lie in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                    3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                  4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                  2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                  5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -value : value;
}

WienerPath sample_path(std::uint64_t seed, int path_index, double T, int n_fine) {
    if (!(T > 0.0)) throw std::invalid_argument("sample_path: T must be positive");
    if (n_fine < 1) throw std::invalid_argument("sample_path: n_fine must be >= 1");
    if (path_index < 0) throw std::invalid_argument("sample_path: path_index must be >= 0");

    WienerPath path;
    path.T = T;
    path.n_fine = n_fine;
    path.seed = seed;
    path.path_index = path_index;
    path.fine_increments.resize(n_fine);
    const double sd = std::sqrt(T / n_fine);
    for (int k = 0; k < n_fine; ++k) {
        const double u = counter_uniform(seed, static_cast<std::uint64_t>(path_index),
                                         static_cast<std::uint64_t>(k));
        path.fine_increments[k] = sd * normal_inverse_cdf(u);
    }
    return path;
}

namespace {

double dyadic_sum(const double* v, int n) {
    if (n == 1) return v[0];
    if (n == 2) return v[0] + v[1];
    const int left = (n + 1) / 2;
    return dyadic_sum(v, left) + dyadic_sum(v + left, n - left);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return dyadic_sum(values.data(), static_cast<int>(values.size()));
}

std::vector<double> coarsen(const WienerPath& path, int n_coarse) {
    if (n_coarse < 1 || path.n_fine % n_coarse != 0)
        throw std::invalid_argument("coarsen: n_coarse must divide n_fine");
    const int block = path.n_fine / n_coarse;
    std::vector<double> out(n_coarse);
    for (int i = 0; i < n_coarse; ++i)
        out[i] = dyadic_sum(path.fine_increments.data() + i * block, block);
    return out;
}

std::uint64_t WienerPath::checksum() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double x : fine_increments) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

void write_path(std::ostream& out, const WienerPath& path) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g %d %llu %d\n", path.T, path.n_fine,
                  static_cast<unsigned long long>(path.seed), path.path_index);
    out << buf;
    for (double dw : path.fine_increments) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", dw);
        out << buf;
    }
}

}  // namespace stvf
