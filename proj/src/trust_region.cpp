#include "boundwalk/trust_region.hpp"

#include "boundwalk/optim2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace boundwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// argmin of lin * t + mu * t^2 over [lo, hi]; mu == 0 picks the endpoint
// that minimises the linear term.
double quadratic_argmin(double lin, double mu, double lo, double hi) {
    if (mu > 0.0) return std::clamp(-lin / (2.0 * mu), lo, hi);
    if (lin > 0.0) return lo;
    if (lin < 0.0) return hi;
    return std::clamp(0.0, lo, hi);
}

void check_multipliers(double mu) {
    if (!(mu >= 0.0)) throw std::invalid_argument("mu must be non-negative");
}

double l1_component(double d, double t, double lin, double mu) { return std::abs(d - t) + lin * t + mu * t * t; }

// The right derivative of the L-infinity inner value in epsilon is
// 1 + sum over active j of (2 mu eps - |v_j|), v_j = lambda b_j + 2 mu d_j,
// where j is active (its slack bound binds) for eps < e_j. Returns the e_j
// and |v_j|; inactive components get e_j = 0.
void epsilon_breaks(double lambda, double mu, const TrustRegionProblem& p, std::vector<std::pair<double, double>>& out) {
    out.clear();
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double v = lambda * p.b[j] + 2.0 * mu * (p.x[j] - p.x_tilde[j]);
        if (v == 0.0) continue;
        // v > 0 pushes delta down, so the lower slack bound x - eps binds.
        double e = v > 0.0 ? p.x[j] - p.bounds.lower : p.bounds.upper - p.x[j];
        if (mu > 0.0) e = std::min(e, std::abs(v) / (2.0 * mu));
        if (e > 0.0) out.emplace_back(e, std::abs(v));
    }
}

double equality_residual(const TrustRegionProblem& p, const Vector& delta) { return dot(p.b, delta) - p.c; }

bool meets_constraints(const TrustRegionProblem& p, const Vector& delta, double eq_tol) {
    return std::abs(equality_residual(p, delta)) <= eq_tol * std::max(1.0, std::abs(p.c)) &&
           squared_norm(delta) <= p.r * (1.0 + 1e-12);
}

// Illinois-modified regula falsi for a non-increasing scalar function on a
// bracket [a, b] with f(a) >= 0 >= f(b). `eval` returns f and may store
// whatever it needs for later interpolation.
template <typename Eval>
void illinois(double& a, double& fa, double& b, double& fb, Eval&& eval, double ftol, int max_iter) {
    int side = 0;
    for (int it = 0; it < max_iter; ++it) {
        if (!(b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(a), std::abs(b)})))
            break;
        double m = (fa - fb) > 0.0 ? a + (b - a) * fa / (fa - fb) : 0.5 * (a + b);
        if (!(m > a && m < b)) m = 0.5 * (a + b);
        const double fm = eval(m);
        if (std::abs(fm) <= ftol) {
            a = b = m;
            fa = fb = fm;
            return;
        }
        if (fm > 0.0) {
            a = m;
            fa = fm;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = m;
            fb = fm;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
}

struct Probe {
    Vector delta;
    double bdot = 0.0;
    double sq = 0.0;
    double lambda = 0.0;
    double epsilon = 0.0;
};

Probe make_probe(double lambda, double mu, const TrustRegionProblem& p) {
    Probe pr;
    pr.lambda = lambda;
    pr.delta = inner_infimum(lambda, mu, p, &pr.epsilon).delta;
    pr.bdot = dot(p.b, pr.delta);
    pr.sq = squared_norm(pr.delta);
    return pr;
}

// Finds lambda with b.delta(lambda, mu) = c. b.delta is non-increasing in
// lambda (concavity of g), so a bracket plus regula falsi converges; the
// last bracket is interpolated to meet the equality exactly.
std::optional<Probe> lambda_root(double mu, double lambda_guess, const TrustRegionProblem& p, int& probes) {
    const double ftol = 1e-13 * std::max(1.0, std::abs(p.c));
    Probe start = make_probe(lambda_guess, mu, p);
    ++probes;
    double f0 = start.bdot - p.c;
    if (std::abs(f0) <= ftol) return start;

    Probe lo_probe = start, hi_probe = start;
    double a = lambda_guess, fa = f0, b = lambda_guess, fb = f0;
    double step = 1.0 + std::abs(lambda_guess);
    bool bracketed = false;
    for (int k = 0; k < 200 && !bracketed; ++k, step *= 2.0) {
        if (f0 > 0.0) {
            const double cand = lambda_guess + step;
            Probe pr = make_probe(cand, mu, p);
            ++probes;
            const double f = pr.bdot - p.c;
            if (f <= 0.0) {
                b = cand;
                fb = f;
                hi_probe = std::move(pr);
                bracketed = true;
            } else {
                a = cand;
                fa = f;
                lo_probe = std::move(pr);
            }
        } else {
            const double cand = lambda_guess - step;
            Probe pr = make_probe(cand, mu, p);
            ++probes;
            const double f = pr.bdot - p.c;
            if (f >= 0.0) {
                a = cand;
                fa = f;
                lo_probe = std::move(pr);
                bracketed = true;
            } else {
                b = cand;
                fb = f;
                hi_probe = std::move(pr);
            }
        }
    }
    if (!bracketed) return std::nullopt;
    if (std::abs(fa) <= ftol) return lo_probe;
    if (std::abs(fb) <= ftol) return hi_probe;

    auto eval = [&](double lam) {
        Probe pr = make_probe(lam, mu, p);
        ++probes;
        const double f = pr.bdot - p.c;
        if (f >= 0.0) lo_probe = pr;
        if (f <= 0.0) hi_probe = pr;
        return f;
    };
    illinois(a, fa, b, fb, eval, ftol, 200);
    fa = lo_probe.bdot - p.c;
    fb = hi_probe.bdot - p.c;
    if (std::abs(fa) <= ftol) return lo_probe;
    if (std::abs(fb) <= ftol) return hi_probe;

    // Convex combination of the two bracket minimisers hits b.delta = c.
    const double theta = fa / (fa - fb);
    Probe out = lo_probe;
    for (std::size_t j = 0; j < out.delta.size(); ++j)
        out.delta[j] = (1.0 - theta) * lo_probe.delta[j] + theta * hi_probe.delta[j];
    out.lambda = (1.0 - theta) * lo_probe.lambda + theta * hi_probe.lambda;
    out.epsilon = (1.0 - theta) * lo_probe.epsilon + theta * hi_probe.epsilon;
    out.bdot = dot(p.b, out.delta);
    out.sq = squared_norm(out.delta);
    return out;
}

struct Recovered {
    Vector delta;
    DualState dual;
};

// Exact dual maximisation by nested monotone root finding: lambda enforces
// the equality for each mu, mu is the smallest value whose step fits the
// trust region. Used when the quasi-Newton multipliers do not reproduce a
// feasible primal point (kinks of g for L1 / L-infinity at mu = 0).
std::optional<Recovered> recover_convex(const TrustRegionProblem& p, const DualState& guess, int& probes) {
    auto at_zero = lambda_root(0.0, guess.lambda, p, probes);
    if (!at_zero) return std::nullopt;
    if (at_zero->sq <= p.r) {
        DualState dual{at_zero->lambda, 0.0, std::nullopt};
        if (p.norm == NormKind::Linf) dual.epsilon = at_zero->epsilon;
        return Recovered{std::move(at_zero->delta), dual};
    }

    double mu_lo = 0.0;
    double lam_lo = at_zero->lambda;
    double f_lo = at_zero->sq - p.r;
    double mu_hi = std::max(guess.mu, 1e-6);
    std::optional<Probe> hi;
    for (int k = 0; k < 120; ++k, mu_hi *= 4.0) {
        hi = lambda_root(mu_hi, lam_lo, p, probes);
        if (!hi) return std::nullopt;
        if (hi->sq <= p.r) break;
        mu_lo = mu_hi;
        lam_lo = hi->lambda;
        f_lo = hi->sq - p.r;
        hi.reset();
    }
    if (!hi) return std::nullopt;

    Probe best = *hi;
    double f_hi = best.sq - p.r;
    // ||delta(mu)||^2 - r is non-increasing in mu.
    auto eval = [&](double mu) {
        auto pr = lambda_root(mu, best.lambda, p, probes);
        if (!pr) return 0.0;
        const double f = pr->sq - p.r;
        if (f <= 0.0) best = *pr;
        return f;
    };
    double a = mu_lo, b = mu_hi;
    illinois(a, f_lo, b, f_hi, eval, 1e-10 * p.r, 100);
    if (best.sq > p.r) return std::nullopt;
    DualState dual{best.lambda, b, std::nullopt};
    if (p.norm == NormKind::Linf) dual.epsilon = best.epsilon;
    return Recovered{std::move(best.delta), dual};
}

// Minimum-norm step on the hyperplane that keeps every component outside
// `free_set` at d_j. Returns nothing when the hyperplane is out of reach or
// the step exceeds the trust region.
std::optional<Vector> fit_support(const TrustRegionProblem& p, const Vector& d, const std::vector<char>& free_set) {
    const std::size_t n = p.size();
    Vector delta(n, 0.0);
    double target = p.c;
    double budget = p.r;
    double reach_lo = 0.0, reach_hi = 0.0;
    bool any_free = false;
    for (std::size_t j = 0; j < n; ++j) {
        if (free_set[j]) {
            any_free = true;
            const double lo = p.step_lower(j), hi = p.step_upper(j);
            reach_lo += std::min(p.b[j] * lo, p.b[j] * hi);
            reach_hi += std::max(p.b[j] * lo, p.b[j] * hi);
        } else {
            delta[j] = d[j];
            target -= p.b[j] * d[j];
            budget -= d[j] * d[j];
        }
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(p.c));
    if (budget < -1e-15) return std::nullopt;
    if (!any_free) {
        if (std::abs(target) <= tol) return delta;
        return std::nullopt;
    }
    if (target < reach_lo - tol || target > reach_hi + tol) return std::nullopt;

    auto fill = [&](double nu, Vector& out) {
        double bd = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!free_set[j]) continue;
            out[j] = std::clamp(nu * p.b[j], p.step_lower(j), p.step_upper(j));
            bd += p.b[j] * out[j];
        }
        return bd;
    };
    // b.delta(nu) is non-decreasing in nu; negate to reuse the solver.
    Vector lo_vec = delta, hi_vec = delta;
    double a = 0.0, fa = -(fill(0.0, lo_vec) - target);
    hi_vec = lo_vec;
    double b = 0.0, fb = fa;
    if (std::abs(fa) > tol) {
        const double dir = fa > 0.0 ? 1.0 : -1.0;  // fa > 0 means b.delta below target: raise nu
        double step = 1.0;
        bool bracketed = false;
        for (int k = 0; k < 200 && !bracketed; ++k, step *= 2.0) {
            Vector trial = delta;
            const double f = -(fill(dir * step, trial) - target);
            if (dir > 0.0) {
                if (f <= 0.0) {
                    b = step;
                    fb = f;
                    hi_vec = std::move(trial);
                    bracketed = true;
                } else {
                    a = step;
                    fa = f;
                    lo_vec = std::move(trial);
                }
            } else {
                if (f >= 0.0) {
                    a = -step;
                    fa = f;
                    lo_vec = std::move(trial);
                    bracketed = true;
                } else {
                    b = -step;
                    fb = f;
                    hi_vec = std::move(trial);
                }
            }
        }
        if (!bracketed) return std::nullopt;
        auto eval = [&](double nu) {
            Vector trial = delta;
            const double f = -(fill(nu, trial) - target);
            if (f >= 0.0) lo_vec = trial;
            if (f <= 0.0) hi_vec = trial;
            return f;
        };
        illinois(a, fa, b, fb, eval, tol, 200);
        double rlo = dot(p.b, lo_vec) - p.c, rhi = dot(p.b, hi_vec) - p.c;
        if (std::abs(rlo) <= tol) {
            delta = lo_vec;
        } else if (std::abs(rhi) <= tol) {
            delta = hi_vec;
        } else {
            const double theta = rlo / (rlo - rhi);
            for (std::size_t j = 0; j < n; ++j) delta[j] = (1.0 - theta) * lo_vec[j] + theta * hi_vec[j];
        }
    } else {
        delta = lo_vec;
    }
    if (squared_norm(delta) > p.r * (1.0 + 1e-12)) return std::nullopt;
    return delta;
}

// Grows the changed-component set from `seed`, adding kept components in
// the given priority order until a feasible refit exists.
std::optional<Vector> grow_support(const TrustRegionProblem& p, const Vector& d, std::vector<char> free_set,
                                   const std::vector<std::size_t>& priority) {
    if (auto fit = fit_support(p, d, free_set)) return fit;
    std::vector<std::size_t> order;
    for (std::size_t j : priority)
        if (!free_set[j]) order.push_back(j);
    std::size_t added = 0;
    std::size_t batch = 1;
    while (added < order.size()) {
        const std::size_t stop = std::min(order.size(), added + batch);
        for (; added < stop; ++added) free_set[order[added]] = 1;
        if (auto fit = fit_support(p, d, free_set)) return fit;
        if (p.size() > 64) batch *= 2;
    }
    return std::nullopt;
}

std::vector<char> changed_set(const Vector& d, const Vector& delta) {
    std::vector<char> out(d.size(), 0);
    for (std::size_t j = 0; j < d.size(); ++j) out[j] = std::abs(delta[j] - d[j]) > kL0Tolerance;
    return out;
}

// Tries to restore changed components to d_j one at a time, smallest |b_j|
// first, keeping each restoration that still admits a feasible refit.
Vector prune_support(const TrustRegionProblem& p, const Vector& d, Vector delta) {
    std::vector<char> free_set = changed_set(d, delta);
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < d.size(); ++j)
        if (free_set[j]) members.push_back(j);
    if (members.size() > 64) return delta;
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t i, std::size_t j) { return std::abs(p.b[i]) < std::abs(p.b[j]); });
    for (std::size_t j : members) {
        free_set[j] = 0;
        if (auto fit = fit_support(p, d, free_set)) delta = std::move(*fit);
        else free_set[j] = 1;
    }
    return delta;
}

// Among steps with the same support, prefer the one closest to d in L1.
// The L0 count is flat on a support, so without this tie-break small trust
// regions never move a component far enough to release it; the L1 pull
// walks components back onto d_j one after another.
void refine_l1(const TrustRegionProblem& p, const Vector& d, Vector& delta) {
    const std::vector<char> free_set = changed_set(d, delta);
    TrustRegionProblem sub;
    sub.norm = NormKind::L1;
    sub.bounds = p.bounds;
    sub.c = p.c;
    sub.r = p.r;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (!free_set[j]) {
            sub.c -= p.b[j] * delta[j];
            sub.r -= delta[j] * delta[j];
            continue;
        }
        members.push_back(j);
        sub.x.push_back(p.x[j]);
        sub.x_tilde.push_back(p.x_tilde[j]);
        sub.b.push_back(p.b[j]);
    }
    if (members.empty() || !(sub.r > 0.0) || squared_norm(sub.b) == 0.0) return;
    const Solution s = solve(sub);
    if (!s.feasible) return;
    Vector out = delta;
    for (std::size_t k = 0; k < members.size(); ++k) out[members[k]] = s.delta[k];
    if (!meets_constraints(p, out, 1e-10)) return;
    if (lp_distance(d, out, NormKind::L0) > lp_distance(d, delta, NormKind::L0)) return;
    delta = std::move(out);
}

// The dual minimiser fixes a candidate set of changed components; the
// values on that set are refit to meet the constraints. Alternative sets
// grown from scratch (by leverage |b_j| and by trust-budget use d_j^2) are
// also tried and the sparsest feasible step wins.
std::optional<Vector> recover_l0(const TrustRegionProblem& p, const Vector& dual_delta, bool dual_feasible) {
    const Vector d = p.residual();
    const std::size_t n = p.size();
    std::vector<std::size_t> by_leverage(n), by_budget(n);
    std::iota(by_leverage.begin(), by_leverage.end(), 0);
    std::iota(by_budget.begin(), by_budget.end(), 0);
    std::stable_sort(by_leverage.begin(), by_leverage.end(),
                     [&](std::size_t i, std::size_t j) { return std::abs(p.b[i]) > std::abs(p.b[j]); });
    std::stable_sort(by_budget.begin(), by_budget.end(),
                     [&](std::size_t i, std::size_t j) { return d[i] * d[i] > d[j] * d[j]; });

    std::vector<Vector> candidates;
    if (dual_feasible) candidates.push_back(dual_delta);
    const std::vector<char> none(n, 0);
    for (auto&& cand : {grow_support(p, d, changed_set(d, dual_delta), by_leverage), grow_support(p, d, none, by_leverage),
                        grow_support(p, d, none, by_budget)}) {
        if (cand) candidates.push_back(*cand);
    }
    if (candidates.empty()) return std::nullopt;

    std::optional<Vector> best;
    double best_count = kInf;
    for (auto& cand : candidates) {
        Vector pruned = prune_support(p, d, std::move(cand));
        const double count = lp_distance(d, pruned, NormKind::L0);
        if (count < best_count) {
            best_count = count;
            best = std::move(pruned);
        }
    }
    if (best) refine_l1(p, d, *best);
    return best;
}

// Largest sign(c) * b.delta within the trust region and box.
Vector toward_boundary(const TrustRegionProblem& p) {
    const double s = p.c >= 0.0 ? 1.0 : -1.0;
    const std::size_t n = p.size();
    auto at = [&](double tau) {
        Vector delta(n);
        for (std::size_t j = 0; j < n; ++j) delta[j] = std::clamp(tau * s * p.b[j], p.step_lower(j), p.step_upper(j));
        return delta;
    };
    Vector extreme(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double dir = s * p.b[j];
        extreme[j] = dir > 0.0 ? p.step_upper(j) : dir < 0.0 ? p.step_lower(j) : std::clamp(0.0, p.step_lower(j), p.step_upper(j));
    }
    if (squared_norm(extreme) <= p.r) return extreme;
    double lo = 0.0, hi = 1.0;
    while (squared_norm(at(hi)) <= p.r && hi < 1e300) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (squared_norm(at(mid)) <= p.r ? lo : hi) = mid;
    }
    return at(lo);
}

}  // namespace

InnerResult inner_infimum_l2(double lambda, double mu, const TrustRegionProblem& p) {
    check_multipliers(mu);
    InnerResult out;
    out.delta.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = p.x[j] - p.x_tilde[j];
        const double t = std::clamp((2.0 * d - lambda * p.b[j]) / (2.0 * (1.0 + mu)), p.step_lower(j), p.step_upper(j));
        out.delta[j] = t;
        out.lagrangian_value += (d - t) * (d - t) + lambda * p.b[j] * t + mu * t * t;
    }
    return out;
}

InnerResult inner_infimum_l1(double lambda, double mu, const TrustRegionProblem& p) {
    check_multipliers(mu);
    InnerResult out;
    out.delta.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = p.x[j] - p.x_tilde[j];
        const double lo = p.step_lower(j), hi = p.step_upper(j);
        const double lin = lambda * p.b[j];
        double cands[5] = {std::clamp(d, lo, hi), lo, hi, std::clamp(d, lo, hi), std::clamp(d, lo, hi)};
        if (mu > 0.0) {
            cands[3] = std::clamp(-(1.0 + lin) / (2.0 * mu), lo, hi);  // branch delta > d
            cands[4] = std::clamp((1.0 - lin) / (2.0 * mu), lo, hi);   // branch delta < d
        }
        double best = cands[0];
        double best_val = l1_component(d, best, lin, mu);
        for (double t : cands) {
            const double v = l1_component(d, t, lin, mu);
            if (v < best_val) {
                best = t;
                best_val = v;
            }
        }
        out.delta[j] = best;
        out.lagrangian_value += best_val;
    }
    return out;
}

InnerResult inner_infimum_l0(double lambda, double mu, const TrustRegionProblem& p) {
    check_multipliers(mu);
    InnerResult out;
    out.delta.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = p.x[j] - p.x_tilde[j];
        const double lin = lambda * p.b[j];
        const double keep_val = lin * d + mu * d * d;
        const double t = quadratic_argmin(lin, mu, p.step_lower(j), p.step_upper(j));
        const double move_val = (std::abs(d - t) > kL0Tolerance ? 1.0 : 0.0) + lin * t + mu * t * t;
        if (keep_val < move_val) {
            out.delta[j] = d;
            out.lagrangian_value += keep_val;
        } else {
            out.delta[j] = t;
            out.lagrangian_value += move_val;
        }
    }
    return out;
}

InnerResult inner_infimum_linf(double lambda, double mu, double epsilon, const TrustRegionProblem& p) {
    check_multipliers(mu);
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
    InnerResult out;
    out.delta.resize(p.size());
    out.lagrangian_value = epsilon;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double lo = std::max(p.bounds.lower, p.x[j] - epsilon) - p.x_tilde[j];
        const double hi = std::min(p.bounds.upper, p.x[j] + epsilon) - p.x_tilde[j];
        const double lin = lambda * p.b[j];
        const double t = quadratic_argmin(lin, mu, lo, hi);
        out.delta[j] = t;
        out.lagrangian_value += lin * t + mu * t * t;
    }
    return out;
}

EpsilonSearch epsilon_search_linf(double lambda, double mu, const TrustRegionProblem& p) {
    check_multipliers(mu);
    thread_local std::vector<std::pair<double, double>> breaks;
    epsilon_breaks(lambda, mu, p, breaks);

    // slope(eps) = 1 + sum over e_j > eps of (2 mu eps - w_j), non-decreasing.
    // Quickselect on the breakpoints brackets its first sign change; the
    // components known to stay active inside the bracket are accumulated.
    double active_w = 0.0;
    for (const auto& br : breaks) active_w += br.second;
    if (1.0 - active_w >= 0.0) return {0.0, inner_infimum_linf(lambda, mu, 0.0, p)};

    double lower = 0.0;
    double upper = kInf;
    double above_m = 0.0, above_w = 0.0;
    auto first = breaks.begin(), last = breaks.end();
    while (first != last) {
        auto mid = first + (last - first) / 2;
        std::nth_element(first, mid, last);
        const double v = mid->first;
        auto split = std::partition(first, last, [v](const auto& br) { return br.first < v; });
        double m = above_m, w = above_w;
        for (auto it = split; it != last; ++it)
            if (it->first > v) {
                m += 1.0;
                w += it->second;
            }
        if (1.0 + 2.0 * mu * v * m - w >= 0.0) {
            upper = v;
            for (auto it = split; it != last; ++it) {
                above_m += 1.0;
                above_w += it->second;
            }
            last = split;
        } else {
            lower = v;
            // Elements at or below v are inactive beyond it.
            first = std::partition(split, last, [v](const auto& br) { return br.first <= v; });
        }
    }
    double eps = upper;
    if (mu > 0.0 && above_m > 0.0) {
        const double root = (above_w - 1.0) / (2.0 * mu * above_m);
        if (root < upper) eps = std::max(root, lower);
    }
    return {eps, inner_infimum_linf(lambda, mu, eps, p)};
}

InnerResult inner_infimum(double lambda, double mu, const TrustRegionProblem& p, double* epsilon_out) {
    switch (p.norm) {
        case NormKind::L0: return inner_infimum_l0(lambda, mu, p);
        case NormKind::L1: return inner_infimum_l1(lambda, mu, p);
        case NormKind::L2: return inner_infimum_l2(lambda, mu, p);
        case NormKind::Linf: {
            auto found = epsilon_search_linf(lambda, mu, p);
            if (epsilon_out) *epsilon_out = found.epsilon;
            return std::move(found.inner);
        }
    }
    throw std::logic_error("unhandled norm");
}

DualEvaluation dual_value_and_grad(double lambda, double mu, const TrustRegionProblem& p, std::optional<double> epsilon) {
    DualEvaluation out;
    InnerResult inner;
    if (p.norm == NormKind::Linf && epsilon) {
        inner = inner_infimum_linf(lambda, mu, *epsilon, p);
        out.epsilon = epsilon;
    } else {
        double eps = 0.0;
        inner = inner_infimum(lambda, mu, p, &eps);
        if (p.norm == NormKind::Linf) out.epsilon = eps;
    }
    out.value = inner.lagrangian_value - lambda * p.c - mu * p.r;
    out.d_lambda = dot(p.b, inner.delta) - p.c;
    out.d_mu = squared_norm(inner.delta) - p.r;
    out.delta = std::move(inner.delta);
    return out;
}

DualMaximum maximize_dual(const TrustRegionProblem& p, const SolverSettings& settings) {
    DualMaximum out;
    Minimum2 found;
    if (p.norm == NormKind::L0) {
        auto neg_g = [&](const Point2& q) {
            if (q[1] < 0.0) return kInf;
            return -dual_value_and_grad(q[0], q[1], p).value;
        };
        NelderMeadOptions nm;
        nm.max_iterations = std::max(settings.max_dual_iterations, 200);
        found = minimize_nelder_mead(neg_g, {Point2{0.0, 0.0}, Point2{0.1, 0.0}, Point2{0.0, 0.1}}, nm);
    } else {
        auto neg_g = [&](const Point2& q) {
            const auto ev = dual_value_and_grad(q[0], q[1], p);
            return Value2{-ev.value, {-ev.d_lambda, -ev.d_mu}};
        };
        QuasiNewtonOptions qn;
        qn.max_iterations = settings.max_dual_iterations;
        qn.gradient_tolerance = settings.dual_tolerance;
        found = minimize_bounded_bfgs(neg_g, {0.0, 0.0}, qn);
    }
    out.state.lambda = found.point[0];
    out.state.mu = std::max(0.0, found.point[1]);
    out.value = -found.value;
    out.iterations = found.iterations;
    out.converged = found.converged;
    if (p.norm == NormKind::Linf)
        out.state.epsilon = epsilon_search_linf(out.state.lambda, out.state.mu, p).epsilon;
    return out;
}

Solution solve(const TrustRegionProblem& problem, const SolverSettings& settings) {
    problem.validate();
    const double scale = std::sqrt(squared_norm(problem.b));
    TrustRegionProblem p = problem;
    for (double& e : p.b) e /= scale;
    p.c /= scale;

    const DualMaximum dm = maximize_dual(p, settings);
    Vector delta = inner_infimum(dm.state.lambda, dm.state.mu, p).delta;
    DualState dual = dm.state;
    int work = dm.iterations;
    bool reachable = true;

    if (p.norm == NormKind::L0) {
        if (auto fit = recover_l0(p, delta, meets_constraints(p, delta, 1e-10))) delta = std::move(*fit);
        else reachable = false;
    } else if (!meets_constraints(p, delta, 1e-10)) {
        {
            int probes = 0;
            if (auto rec = recover_convex(p, dm.state, probes)) {
                delta = std::move(rec->delta);
                dual = rec->dual;
            } else {
                reachable = false;
            }
            work += probes;
        }
    }
    if (!reachable) delta = toward_boundary(p);

    const double sq = squared_norm(delta);
    if (sq > p.r) {
        const double shrink = std::sqrt(p.r / sq);
        for (double& e : delta) e *= shrink;
    }
    for (std::size_t j = 0; j < delta.size(); ++j) {
        const double v = std::clamp(p.x_tilde[j] + delta[j], p.bounds.lower, p.bounds.upper);
        delta[j] = v - p.x_tilde[j];
        if (p.x_tilde[j] + delta[j] < p.bounds.lower) delta[j] = std::nextafter(delta[j], kInf);
        if (p.x_tilde[j] + delta[j] > p.bounds.upper) delta[j] = std::nextafter(delta[j], -kInf);
    }

    Solution sol;
    const Vector d = problem.residual();
    sol.objective = lp_distance(d, delta, problem.norm);
    sol.feasible =
        reachable && std::abs(dot(problem.b, delta) - problem.c) <= 1e-3 * std::max(1.0, std::abs(problem.c));
    sol.delta = std::move(delta);
    dual.lambda /= scale;
    if (problem.norm == NormKind::Linf) dual.epsilon = lp_distance(d, sol.delta, NormKind::Linf);
    else dual.epsilon.reset();
    sol.dual = dual;
    sol.iterations = work;
    return sol;
}

}  // namespace boundwalk
