#include "gsx/mvn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "gsx/normal.hpp"
#include "gsx/rng.hpp"

namespace gsx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double phi_interval(double lo, double hi) {
    return norm_cdf(hi) - norm_cdf(lo);
}

// Bivariate rectangle by adaptive Simpson over the first coordinate; exact
// to quadrature tolerance, no randomization.
double bivariate_adaptive(double rho, double a1, double b1, double a2, double b2,
                          long* evaluations) {
    const double s = std::sqrt(std::max(1.0 - rho * rho, 0.0));
    if (s < 1e-8) {
        // Degenerate pair: x2 = sign(rho) x1 almost surely.
        const double lo = rho > 0 ? std::max(a1, a2) : std::max(a1, -b2);
        const double hi = rho > 0 ? std::min(b1, b2) : std::min(b1, -a2);
        return std::max(phi_interval(lo, hi), 0.0);
    }
    auto f = [&](double x) {
        ++*evaluations;
        return norm_pdf(x) * phi_interval((a2 - rho * x) / s, (b2 - rho * x) / s);
    };
    const double lo = std::max(a1, -9.5), hi = std::min(b1, 9.5);
    if (!(lo < hi)) return 0.0;

    // Recursive Simpson with Richardson acceptance, depth-bounded.
    struct Seg {
        double a, m, b, fa, fm, fb, whole;
        int depth;
    };
    auto simpson = [](double a, double fa, double fm, double fb, double b) {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    };
    const int kSegs = 8;
    double total = 0.0;
    std::vector<Seg> stack;
    for (int seg = 0; seg < kSegs; ++seg) {
        const double a = lo + (hi - lo) * seg / kSegs;
        const double b = lo + (hi - lo) * (seg + 1) / kSegs;
        const double m = 0.5 * (a + b);
        const double fa = f(a), fm = f(m), fb = f(b);
        stack.push_back({a, m, b, fa, fm, fb, simpson(a, fa, fm, fb, b), 0});
    }
    const double eps = 1e-11;
    while (!stack.empty()) {
        Seg s1 = stack.back();
        stack.pop_back();
        const double ml = 0.5 * (s1.a + s1.m), mr = 0.5 * (s1.m + s1.b);
        const double fml = f(ml), fmr = f(mr);
        const double left = simpson(s1.a, s1.fa, fml, s1.fm, s1.m);
        const double right = simpson(s1.m, s1.fm, fmr, s1.fb, s1.b);
        if (std::abs(left + right - s1.whole) < 15.0 * eps || s1.depth >= 28) {
            total += left + right + (left + right - s1.whole) / 15.0;
        } else {
            stack.push_back({s1.a, ml, s1.m, s1.fa, fml, s1.fm, left, s1.depth + 1});
            stack.push_back({s1.m, mr, s1.b, s1.fm, fmr, s1.fb, right, s1.depth + 1});
        }
    }
    return std::clamp(total, 0.0, 1.0);
}

// Truncation-ordered Cholesky factorization: at each step pivot in the
// remaining variable with the least conditional probability mass, tracking
// the truncated-normal conditional means. Bounds are permuted in place.
struct OrderedFactor {
    Eigen::MatrixXd chol;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

OrderedFactor ordered_cholesky(Eigen::MatrixXd cov, Eigen::VectorXd a, Eigen::VectorXd b) {
    const int k = static_cast<int>(a.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(k);

    for (int i = 0; i < k; ++i) {
        int best = i;
        double best_mass = kInf;
        for (int j = i; j < k; ++j) {
            double var = cov(j, j) - L.row(j).head(i).squaredNorm();
            double sd = std::sqrt(std::max(var, 1e-100));
            double shift = L.row(j).head(i).dot(y.head(i));
            double mass = phi_interval((a(j) - shift) / sd, (b(j) - shift) / sd);
            if (mass < best_mass) {
                best_mass = mass;
                best = j;
            }
        }
        if (best != i) {
            cov.row(i).swap(cov.row(best));
            cov.col(i).swap(cov.col(best));
            L.row(i).head(i).swap(L.row(best).head(i));
            std::swap(a(i), a(best));
            std::swap(b(i), b(best));
        }

        double var = cov(i, i) - L.row(i).head(i).squaredNorm();
        const double lii = std::sqrt(std::max(var, 1e-100));
        L(i, i) = lii;
        for (int j = i + 1; j < k; ++j) {
            L(j, i) = (cov(j, i) - L.row(j).head(i).dot(L.row(i).head(i))) / lii;
        }

        // Conditional expectation of the truncated coordinate, used by the
        // ordering heuristic at later steps.
        const double shift = L.row(i).head(i).dot(y.head(i));
        const double lo = (a(i) - shift) / lii;
        const double hi = (b(i) - shift) / lii;
        const double mass = phi_interval(lo, hi);
        if (mass > 1e-12) {
            const double plo = std::isinf(lo) ? 0.0 : norm_pdf(lo);
            const double phi_hi = std::isinf(hi) ? 0.0 : norm_pdf(hi);
            y(i) = (plo - phi_hi) / mass;
        } else {
            y(i) = std::isinf(lo) ? (std::isinf(hi) ? 0.0 : hi)
                                  : (std::isinf(hi) ? lo : 0.5 * (lo + hi));
        }
    }
    return {std::move(L), std::move(a), std::move(b)};
}

// Separation-of-variables integrand over the unit cube of dimension k-1.
class SovIntegrand {
  public:
    explicit SovIntegrand(const OrderedFactor& f)
        : L_(f.chol), a_(f.lower), b_(f.upper), k_(static_cast<int>(f.lower.size())),
          y_(k_) {}

    double operator()(const double* w) {
        double d = cdf_edge(a_(0) / L_(0, 0));
        double e = cdf_edge(b_(0) / L_(0, 0));
        double prob = e - d;
        for (int i = 1; i < k_; ++i) {
            double q = d + w[i - 1] * (e - d);
            q = std::clamp(q, 1e-300, 1.0 - 1e-16);
            y_(i - 1) = norm_quantile(q);
            const double shift = L_.row(i).head(i).dot(y_.head(i));
            const double sd = L_(i, i);
            d = cdf_edge((a_(i) - shift) / sd);
            e = cdf_edge((b_(i) - shift) / sd);
            prob *= std::max(e - d, 0.0);
            if (prob <= 0.0) return 0.0;
        }
        return prob;
    }

  private:
    static double cdf_edge(double x) {
        if (x == kInf) return 1.0;
        if (x == -kInf) return 0.0;
        return norm_cdf(x);
    }

    const Eigen::MatrixXd& L_;
    const Eigen::VectorXd& a_;
    const Eigen::VectorXd& b_;
    int k_;
    Eigen::VectorXd y_;
};

bool is_prime(long n) {
    if (n < 2) return false;
    for (long d = 2; d * d <= n; ++d) {
        if (n % d == 0) return false;
    }
    return true;
}

long prime_at_most(long n) {
    while (!is_prime(n)) --n;
    return n;
}

// Rank-1 Korobov lattice z = (1, a, a^2, ...) mod N. The multiplier is
// picked by randomized search over the P_2 worst-case criterion of the
// weighted Korobov space; deterministic per (N, dim) and cached.
std::vector<long> korobov_vector(long n_points, int dim) {
    static std::mutex mutex;
    static std::map<std::pair<long, int>, std::vector<long>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find({n_points, dim});
    if (it != cache.end()) return it->second;

    const int candidates = n_points <= 4096 ? 96 : (n_points <= 32768 ? 48 : 16);
    CounterRng rng(0x6b6f726f, static_cast<std::uint64_t>(n_points) * 64 + dim);

    // P_2 criterion with geometrically decaying coordinate weights; the
    // ordered Cholesky concentrates variation in the leading coordinates.
    auto p2_score = [&](long a) {
        std::vector<long> idx(dim, 0), step(dim);
        long z = 1;
        for (int j = 0; j < dim; ++j) {
            step[j] = z;
            z = (z * a) % n_points;
        }
        double total = 0.0;
        const double two_pi_sq = 19.739208802178716;
        std::vector<double> gamma(dim);
        double g = 1.0;
        for (int j = 0; j < dim; ++j, g *= 0.5) gamma[j] = g;
        for (long k = 0; k < n_points; ++k) {
            double prod = 1.0;
            for (int j = 0; j < dim; ++j) {
                const double x = static_cast<double>(idx[j]) / n_points;
                prod *= 1.0 + gamma[j] * two_pi_sq * (x * x - x + 1.0 / 6.0);
                idx[j] += step[j];
                if (idx[j] >= n_points) idx[j] -= n_points;
            }
            total += prod;
        }
        return total / n_points;
    };

    long best_a = 1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int c = 0; c < candidates; ++c) {
        const long a = 2 + static_cast<long>(rng.next_u01() * (n_points - 3));
        const double score = p2_score(a);
        if (score < best_score) {
            best_score = score;
            best_a = a;
        }
    }

    std::vector<long> gen(dim);
    long z = 1;
    for (int j = 0; j < dim; ++j) {
        gen[j] = z;
        z = (z * best_a) % n_points;
    }
    cache[{n_points, dim}] = gen;
    return gen;
}

Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& sym, bool* repaired) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig >= 1e-12) {
        *repaired = false;
        return sym;
    }
    if (min_eig < -1e-8) {
        throw std::invalid_argument("correlation matrix is not positive semi-definite");
    }
    *repaired = true;
    Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(1e-12);
    Eigen::MatrixXd fixed =
        eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd scale = fixed.diagonal().cwiseSqrt().cwiseInverse();
    return scale.asDiagonal() * fixed * scale.asDiagonal();
}

}  // namespace

void RectangleProblem::validate() const {
    const int k = dimension();
    if (correlation.rows() != k || correlation.cols() != k || lower.size() != k ||
        upper.size() != k) {
        throw std::invalid_argument("rectangle problem dimensions disagree");
    }
    for (int i = 0; i < k; ++i) {
        if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
            throw std::invalid_argument("rectangle bounds must satisfy lower <= upper");
        }
        if (std::abs(correlation(i, i) - 1.0) > 1e-8) {
            throw std::invalid_argument("correlation matrix must have a unit diagonal");
        }
    }
}

RectangleProblem marginalize(const RectangleProblem& problem) {
    problem.validate();
    std::vector<int> keep;
    for (int i = 0; i < problem.dimension(); ++i) {
        if (!(problem.lower(i) == -kInf && problem.upper(i) == kInf)) keep.push_back(i);
    }
    const int m = static_cast<int>(keep.size());
    RectangleProblem out;
    out.mean.resize(m);
    out.lower.resize(m);
    out.upper.resize(m);
    out.correlation.resize(m, m);
    for (int i = 0; i < m; ++i) {
        out.mean(i) = problem.mean(keep[i]);
        out.lower(i) = problem.lower(keep[i]);
        out.upper(i) = problem.upper(keep[i]);
        for (int j = 0; j < m; ++j) {
            out.correlation(i, j) = problem.correlation(keep[i], keep[j]);
        }
    }
    return out;
}

IntegrationResult mvn_rectangle(const RectangleProblem& problem, double tol, std::uint64_t seed,
                                int n_shifts) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (n_shifts < 2) throw std::invalid_argument("need at least 2 randomization shifts");

    const RectangleProblem reduced = marginalize(problem);
    const int k = reduced.dimension();

    IntegrationResult result;
    if (k == 0) {
        result.value = 1.0;
        return result;
    }
    if (k == 1) {
        result.value = phi_interval(reduced.lower(0) - reduced.mean(0),
                                    reduced.upper(0) - reduced.mean(0));
        return result;
    }
    if (k == 2) {
        const double rho = std::clamp(0.5 * (reduced.correlation(0, 1) + reduced.correlation(1, 0)),
                                      -1.0, 1.0);
        result.value = bivariate_adaptive(rho, reduced.lower(0) - reduced.mean(0),
                                          reduced.upper(0) - reduced.mean(0),
                                          reduced.lower(1) - reduced.mean(1),
                                          reduced.upper(1) - reduced.mean(1),
                                          &result.evaluations);
        result.error_estimate = 1e-10;  // quadrature acceptance threshold
        return result;
    }
    Eigen::MatrixXd corr = 0.5 * (reduced.correlation + reduced.correlation.transpose());
    corr = repair_psd(corr, &result.psd_repaired);

    const OrderedFactor factor =
        ordered_cholesky(corr, reduced.lower - reduced.mean, reduced.upper - reduced.mean);
    SovIntegrand integrand(factor);

    const int nw = k - 1;
    std::vector<double> offsets(static_cast<std::size_t>(n_shifts) * nw);
    for (int s = 0; s < n_shifts; ++s) {
        CounterRng rng(seed, static_cast<std::uint64_t>(s));
        for (int j = 0; j < nw; ++j) offsets[s * nw + j] = rng.next_u01();
    }

    // Lattice-size ladder: each refinement doubles the rule until the
    // shift-spread error bound meets the tolerance.
    std::vector<double> w(nw);
    std::vector<long> idx(nw);
    for (long level = 512; level <= (1L << 17); level *= 2) {
        const long n_points = prime_at_most(level);
        const std::vector<long> gen = korobov_vector(n_points, nw);

        double mean = 0.0, m2 = 0.0;
        for (int s = 0; s < n_shifts; ++s) {
            std::fill(idx.begin(), idx.end(), 0L);
            double sum = 0.0;
            for (long i = 0; i < n_points; ++i) {
                for (int j = 0; j < nw; ++j) {
                    double u = static_cast<double>(idx[j]) / n_points + offsets[s * nw + j];
                    if (u >= 1.0) u -= 1.0;
                    w[j] = std::abs(2.0 * u - 1.0);  // baker transform
                    idx[j] += gen[j];
                    if (idx[j] >= n_points) idx[j] -= n_points;
                }
                sum += integrand(w.data());
            }
            const double shift_mean = sum / n_points;
            const double delta = shift_mean - mean;
            mean += delta / (s + 1);
            m2 += delta * (shift_mean - mean);
        }
        result.evaluations += n_points * n_shifts;
        result.value = std::clamp(mean, 0.0, 1.0);
        result.error_estimate = 3.0 * std::sqrt(m2 / (n_shifts - 1.0) / n_shifts);
        if (result.error_estimate <= tol) break;
    }
    return result;
}

}  // namespace gsx
