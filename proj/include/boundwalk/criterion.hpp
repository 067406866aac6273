#pragma once

#include "boundwalk/core.hpp"
#include "boundwalk/models.hpp"

#include <optional>
#include <span>

namespace boundwalk {

/// Raised when the criterion gradient vanishes, the usual symptom of
/// gradient masking.
class GradientMaskingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Misclassification criterion. adv = m_y - m_t (targeted) or
/// min over t != y of m_y - m_t (untargeted); negative means adversarial.
class Criterion {
  public:
    static Criterion untargeted(int true_class);
    static Criterion targeted(int true_class, int target_class);

    int true_class() const { return true_class_; }
    std::optional<int> target() const { return target_; }
    bool is_targeted() const { return target_.has_value(); }

  private:
    Criterion(int y, std::optional<int> t) : true_class_(y), target_(t) {}

    int true_class_ = 0;
    std::optional<int> target_;
};

/// Competing class used by the criterion: the target, or the lowest-index
/// argmin of m_y - m_t in untargeted mode.
int competitor(std::span<const double> logits, const Criterion& crit);

double adv_value(std::span<const double> logits, const Criterion& crit);

bool is_adversarial(std::span<const double> logits, const Criterion& crit);

struct CriterionEval {
    double value = 0.0;   // adv at x_tilde
    Vector normal;        // gradient of adv at x_tilde
    int competitor = -1;
    Vector logits;
};

/// One model query: criterion value and its input gradient.
CriterionEval adv_value_and_grad(const Model& model, std::span<const double> x_tilde, const Criterion& crit);

}  // namespace boundwalk
