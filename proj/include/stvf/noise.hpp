#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace stvf {

/// One scalar Brownian path stored as increments on a finest time grid.
/// Increment k ~ Normal(0, T/n_fine), generated by a counter-based stream
/// keyed by (seed, path_index, k): regeneration is deterministic and
/// independent of any sampling schedule.
struct WienerPath {
    double T = 0.0;
    int n_fine = 0;
    std::vector<double> fine_increments;
    std::uint64_t seed = 0;
    int path_index = 0;

    /// FNV-1a over the increment bytes; used to assert that coupled studies
    /// keep consuming the same fine path.
    std::uint64_t checksum() const;
};

WienerPath sample_path(std::uint64_t seed, int path_index, double T, int n_fine);

/// Exact block sums of the fine increments onto n_coarse steps.
/// Summation is pairwise over a fixed dyadic tree, so coarsening commutes
/// bitwise across nested levels and block totals telescope bitwise for
/// power-of-two ratios.
std::vector<double> coarsen(const WienerPath& path, int n_coarse);

/// The dyadic pairwise sum used by coarsen (exposed for telescoping checks).
double pairwise_sum(std::span<const double> values);

/// Inverse standard normal CDF (Wichura's AS241, double precision).
double normal_inverse_cdf(double p);

/// Counter-based uniform in (0,1): Philox2x64-10 output mapped to the
/// centered 53-bit lattice, never exactly 0 or 1.
double counter_uniform(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo);

/// Path dump: header `T n_fine seed path_index`, one increment per line.
void write_path(std::ostream& out, const WienerPath& path);

}  // namespace stvf
