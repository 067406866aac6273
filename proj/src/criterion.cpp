#include "boundwalk/criterion.hpp"

#include <string>

namespace boundwalk {

namespace {

void check_class(int k, std::size_t num_classes, const char* what) {
    if (k < 0 || static_cast<std::size_t>(k) >= num_classes)
        throw std::invalid_argument(std::string(what) + " class " + std::to_string(k) + " outside [0, " +
                                    std::to_string(num_classes) + ")");
}

}  // namespace

Criterion Criterion::untargeted(int true_class) {
    if (true_class < 0) throw std::invalid_argument("negative class index");
    return Criterion(true_class, std::nullopt);
}

Criterion Criterion::targeted(int true_class, int target_class) {
    if (true_class < 0 || target_class < 0) throw std::invalid_argument("negative class index");
    if (true_class == target_class) throw std::invalid_argument("targeted criterion needs target != true class");
    return Criterion(true_class, target_class);
}

int competitor(std::span<const double> logits, const Criterion& crit) {
    if (logits.size() < 2) throw DimensionError("criterion needs at least two logits");
    check_class(crit.true_class(), logits.size(), "true");
    if (crit.target()) {
        check_class(*crit.target(), logits.size(), "target");
        return *crit.target();
    }
    const auto y = static_cast<std::size_t>(crit.true_class());
    int best = -1;
    for (std::size_t t = 0; t < logits.size(); ++t) {
        if (t == y) continue;
        // Largest competing logit == smallest m_y - m_t; ties keep the lower index.
        if (best < 0 || logits[t] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(t);
    }
    return best;
}

double adv_value(std::span<const double> logits, const Criterion& crit) {
    const int t = competitor(logits, crit);
    return logits[static_cast<std::size_t>(crit.true_class())] - logits[static_cast<std::size_t>(t)];
}

bool is_adversarial(std::span<const double> logits, const Criterion& crit) { return adv_value(logits, crit) < 0.0; }

CriterionEval adv_value_and_grad(const Model& model, std::span<const double> x_tilde, const Criterion& crit) {
    CriterionEval out;
    out.logits = forward(model, x_tilde);
    out.competitor = competitor(out.logits, crit);
    Vector coeffs(out.logits.size(), 0.0);
    coeffs[static_cast<std::size_t>(crit.true_class())] = 1.0;
    coeffs[static_cast<std::size_t>(out.competitor)] = -1.0;
    auto sg = grad_scalar(model, x_tilde, coeffs);
    out.value = sg.value;
    out.normal = std::move(sg.grad);
    if (squared_norm(out.normal) == 0.0)
        throw GradientMaskingError("criterion gradient vanished (possible gradient masking)");
    return out;
}

}  // namespace boundwalk
