#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace timeemb {

struct OracleResult {
    std::string property;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerifyOptions {
    std::uint64_t seed = 20240611;
    // Negative control: corrupts the analytic filter gradient before the
    // finite-difference comparison.
    bool perturb_filter_gradient = false;
};

std::vector<OracleResult> fft_roundtrip_oracle(std::uint64_t seed);
std::vector<OracleResult> naive_dft_oracle(std::uint64_t seed);
std::vector<OracleResult> parseval_oracle(std::uint64_t seed);
std::vector<OracleResult> convolution_theorem_oracle(std::uint64_t seed);
std::vector<OracleResult> lti_equivalence_oracle(std::uint64_t seed);
// One result per parameter group of the toy model (L=16, H=8, D=3, M=4, d=8).
std::vector<OracleResult> gradient_oracle(const VerifyOptions& options);

/// All of the above in a fixed order.
std::vector<OracleResult> run_theory_oracles(const VerifyOptions& options = {});

bool all_passed(const std::vector<OracleResult>& results);
void write_report(std::ostream& os, const std::vector<OracleResult>& results);

} // namespace timeemb
