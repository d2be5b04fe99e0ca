#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/math.hpp"
#include "nsp/rng.hpp"

namespace nsp {

// Spatial clustering with anisotropic Gaussian impulse responses. Latent
// parameters are covariance matrices with an inverse-Wishart prior; the
// uniform location prior is replaced for inference by its conjugate Gaussian
// surrogate N(mu0, Sigma/kappa0) with small kappa0, giving a full NIW model.
// Data generation keeps the exact uniform location prior.
struct GaussianConfig {
    int dim = 2;
    double iw_dof = 5.0;    // d > dim + 1 so the prior covariance mean is finite
    Mat iw_scale;           // Psi, symmetric positive definite
    double niw_kappa = 0.01;
    Vec niw_mu;             // defaults to the domain center

    static GaussianConfig isotropic(const Domain& domain, double iw_dof, double mean_var,
                                    double kappa = 0.01) {
        GaussianConfig c;
        c.dim = domain.dim();
        c.iw_dof = iw_dof;
        c.iw_scale = mean_var * (iw_dof - c.dim - 1.0) * Mat::Identity(c.dim, c.dim);
        c.niw_kappa = kappa;
        c.niw_mu = domain.center();
        return c;
    }
};

namespace detail {

inline double multivariate_lgamma(double a, int d) {
    double v = 0.25 * static_cast<double>(d) * static_cast<double>(d - 1) * std::log(M_PI);
    for (int i = 0; i < d; ++i) v += std::lgamma(a - 0.5 * static_cast<double>(i));
    return v;
}

inline double logdet_spd(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) {
        Mat jittered = m + 1e-12 * m.trace() * Mat::Identity(m.rows(), m.cols());
        llt.compute(jittered);
        if (llt.info() != Eigen::Success) throw std::runtime_error("logdet_spd: matrix not SPD");
    }
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline double multivariate_t_logpdf(const Vec& x, double dof, const Vec& loc, const Mat& scale) {
    const int d = static_cast<int>(x.size());
    Eigen::LLT<Mat> llt(scale);
    if (llt.info() != Eigen::Success) throw std::runtime_error("t logpdf: scale not SPD");
    const Vec z = llt.matrixL().solve(x - loc);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) -
           0.5 * static_cast<double>(d) * std::log(dof * M_PI) - 0.5 * logdet -
           0.5 * (dof + d) * std::log1p(z.squaredNorm() / dof);
}

// Wishart(dof, scale) via Bartlett decomposition.
inline Mat sample_wishart(double dof, const Mat& scale, RngStream& rng) {
    const int d = static_cast<int>(scale.rows());
    Eigen::LLT<Mat> llt(scale);
    if (llt.info() != Eigen::Success) throw std::runtime_error("wishart: scale not SPD");
    Mat a = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (dof - static_cast<double>(i)), 1.0));
        for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    Mat la = llt.matrixL() * a;
    return la * la.transpose();
}

inline Mat sample_inverse_wishart(double dof, const Mat& psi, RngStream& rng) {
    return sample_wishart(dof, psi.inverse(), rng).inverse();
}

inline Vec sample_mvn(const Vec& mean, const Mat& cov, RngStream& rng) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("mvn: covariance not SPD");
    Vec z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + llt.matrixL() * z;
}

}  // namespace detail

class GaussianModel {
  public:
    struct Mark {};  // unmarked points
    using Point = MarkedPoint<Mark>;

    struct Params {
        Vec m;
        Mat cov;
    };

    struct Stats {
        int n = 0;
        Vec sum_x;
        Mat sum_xx;
    };

    GaussianModel(GaussianConfig config, Domain domain)
        : config_(std::move(config)), domain_(std::move(domain)) {
        const int d = domain_.dim();
        if (config_.dim != d) throw std::invalid_argument("gaussian: config dim != domain dim");
        if (!(config_.iw_dof > d + 1))
            throw std::invalid_argument("gaussian: need iw_dof > dim + 1");
        if (config_.iw_scale.rows() != d || config_.iw_scale.cols() != d)
            throw std::invalid_argument("gaussian: iw_scale must be dim x dim");
        if (!config_.iw_scale.isApprox(config_.iw_scale.transpose(), 1e-10))
            throw std::invalid_argument("gaussian: iw_scale must be symmetric");
        detail::logdet_spd(config_.iw_scale);  // throws if not SPD
        if (!(config_.niw_kappa > 0.0)) throw std::invalid_argument("gaussian: need niw_kappa > 0");
        if (config_.niw_mu.size() == 0) config_.niw_mu = domain_.center();
        if (config_.niw_mu.size() != d) throw std::invalid_argument("gaussian: niw_mu dim mismatch");
    }

    const Domain& domain() const { return domain_; }
    const GaussianConfig& config() const { return config_; }

    Stats empty_stats() const {
        Stats s;
        s.sum_x = Vec::Zero(config_.dim);
        s.sum_xx = Mat::Zero(config_.dim, config_.dim);
        return s;
    }

    void add(Stats& s, const Point& p) const {
        ++s.n;
        s.sum_x += p.x;
        s.sum_xx += p.x * p.x.transpose();
    }

    void remove(Stats& s, const Point& p) const {
        if (s.n <= 0) throw std::logic_error("gaussian: remove from empty stats");
        --s.n;
        s.sum_x -= p.x;
        s.sum_xx -= p.x * p.x.transpose();
        if (s.n == 0) {
            s.sum_x.setZero();
            s.sum_xx.setZero();
        }
    }

    double log_marginal_new(const Point& p) const { return log_predictive(empty_stats(), p); }

    double log_predictive(const Stats& s, const Point& p) const {
        const Niw post = posterior(s);
        const int d = config_.dim;
        const double t_dof = post.nu - d + 1.0;
        const Mat scale = post.psi * ((post.kappa + 1.0) / (post.kappa * t_dof));
        return detail::multivariate_t_logpdf(p.x, t_dof, post.mu, scale);
    }

    // Marginal likelihood of all absorbed points.
    double log_evidence(const Stats& s) const {
        if (s.n == 0) return 0.0;
        const Niw post = posterior(s);
        const int d = config_.dim;
        return -0.5 * static_cast<double>(s.n * d) * std::log(M_PI) +
               0.5 * static_cast<double>(d) * (std::log(config_.niw_kappa) - std::log(post.kappa)) +
               detail::multivariate_lgamma(0.5 * post.nu, d) -
               detail::multivariate_lgamma(0.5 * config_.iw_dof, d) +
               0.5 * config_.iw_dof * detail::logdet_spd(config_.iw_scale) -
               0.5 * post.nu * detail::logdet_spd(post.psi);
    }

    Params sample_posterior_params(const Stats& s, RngStream& rng) const {
        if (s.n == 0) return sample_prior_params(rng);
        const Niw post = posterior(s);
        Params out;
        out.cov = detail::sample_inverse_wishart(post.nu, post.psi, rng);
        out.m = detail::sample_mvn(post.mu, out.cov / post.kappa, rng);
        return out;
    }

    // Generative prior p(m, theta) = Unif(m | X) IW(theta | d, Psi).
    Params sample_prior_params(RngStream& rng) const {
        Params out;
        out.m = domain_.sample_uniform(rng);
        out.cov = detail::sample_inverse_wishart(config_.iw_dof, config_.iw_scale, rng);
        return out;
    }

    double log_emission(const Params& params, const Point& p) const {
        const Vec d = p.x - params.m;
        Eigen::LLT<Mat> llt(params.cov);
        const Vec z = llt.matrixL().solve(d);
        return -0.5 * (config_.dim * kLog2Pi + detail::logdet_spd(params.cov) + z.squaredNorm());
    }

    Point sample_point(const Params& params, RngStream& rng, bool truncate = true) const {
        for (long attempt = 0;; ++attempt) {
            Vec x = detail::sample_mvn(params.m, params.cov, rng);
            if (!truncate || domain_.contains(x)) return Point{std::move(x), {}};
            if (attempt > 1000000)
                throw std::runtime_error("gaussian: emission rejection did not terminate");
        }
    }

    // Background marks: none.
    double background_mark_log_density(const Mark&) const { return 0.0; }
    Mark sample_background_mark(RngStream&) const { return {}; }
    static int mark_group(const Mark&) { return -1; }
    double background_group_prob(int) const {
        throw std::logic_error("gaussian model has no mark groups");
    }

    template <class ClusterInfo>
    void resample_globals(const std::vector<ClusterInfo>&, const std::vector<const Point*>&,
                          RngStream&) {
        // All parameters are per-cluster.
    }

    void validate_mark(const Mark&) const {}

    // P(x in box, mark group) under the emission, for held-out evaluation.
    // 1-D uses the normal CDF; 2-D integrates the conditional slice.
    double emission_box_mass(const Params& params, const Vec& lo, const Vec& hi, int group) const {
        if (group >= 0) throw std::logic_error("gaussian model has no mark groups");
        const int d = config_.dim;
        if (d == 1) return normal_box_mass(lo[0], hi[0], params.m[0], params.cov(0, 0));
        if (d == 2) return gaussian_box_mass_2d(params, lo, hi);
        double mass = 1.0;  // independence across axes; exact only for diagonal covariance
        for (int k = 0; k < d; ++k)
            mass *= normal_box_mass(lo[k], hi[k], params.m[k], params.cov(k, k));
        return mass;
    }

    double emission_scale_hint() const {
        const Mat mean_cov = config_.iw_scale / (config_.iw_dof - config_.dim - 1.0);
        return std::sqrt(mean_cov.diagonal().maxCoeff());
    }

  private:
    struct Niw {
        double kappa, nu;
        Vec mu;
        Mat psi;
    };

    Niw posterior(const Stats& s) const {
        Niw post;
        post.kappa = config_.niw_kappa + s.n;
        post.nu = config_.iw_dof + s.n;
        if (s.n == 0) {
            post.mu = config_.niw_mu;
            post.psi = config_.iw_scale;
            return post;
        }
        const double n = static_cast<double>(s.n);
        const Vec xbar = s.sum_x / n;
        post.mu = (config_.niw_kappa * config_.niw_mu + s.sum_x) / post.kappa;
        const Mat scatter = s.sum_xx - n * xbar * xbar.transpose();
        const Vec dm = xbar - config_.niw_mu;
        post.psi = config_.iw_scale + scatter +
                   (config_.niw_kappa * n / post.kappa) * dm * dm.transpose();
        return post;
    }

    double gaussian_box_mass_2d(const Params& params, const Vec& lo, const Vec& hi) const {
        // P(box) = int phi(x1) P(x2 range | x1) dx1 by adaptive Simpson.
        const double mu1 = params.m[0], mu2 = params.m[1];
        const double s11 = params.cov(0, 0), s12 = params.cov(0, 1), s22 = params.cov(1, 1);
        const double cond_var = std::max(s22 - s12 * s12 / s11, 1e-12);
        auto f = [&](double x1) {
            const double cmu = mu2 + s12 / s11 * (x1 - mu1);
            return std::exp(normal_logpdf(x1, mu1, s11)) * normal_box_mass(lo[1], hi[1], cmu, cond_var);
        };
        const double sd1 = std::sqrt(s11);
        const double a = std::max(lo[0], mu1 - 10.0 * sd1);
        const double b = std::min(hi[0], mu1 + 10.0 * sd1);
        if (!(b > a)) return 0.0;
        const int n = 400;  // fixed Simpson grid; plenty for desk-scale boxes
        const double h = (b - a) / n;
        double acc = f(a) + f(b);
        for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    }

    GaussianConfig config_;
    Domain domain_;
};

}  // namespace nsp
