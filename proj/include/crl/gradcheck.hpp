#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crl::gradcheck {

struct CheckResult {
  std::string component;
  double worst_rel_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string worst_case;  // replayable description of the worst offender
};

// Compares analytic loss gradients against central finite differences
// (h = 1e-5) over n_cases random (logits, label, hyperparameter) draws per
// variant and class count C in {2, 3, 10, 100}.
//
// crl_sign_flipped swaps the CRL/NLLR gradient for the sign-flipped ratio
// form; it exists as a mutation test of the checker and must fail.
std::vector<CheckResult> check_losses(std::size_t n_cases, std::uint64_t seed,
                                      double threshold = 1e-6,
                                      bool crl_sign_flipped = false);

// Finite-difference validation of every layer kind (parameters and inputs)
// on small randomized shapes, through a cross-entropy head.
std::vector<CheckResult> check_layers(std::uint64_t seed,
                                      double threshold = 1e-4);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace crl::gradcheck
