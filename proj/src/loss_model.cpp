#include "riskmetric/loss_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace riskmetric {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LossModel LossModel::zero_inflated_exponential(double q, double lambda) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("zero-inflated exponential requires q in (0,1]");
    if (!(lambda > 0.0)) throw ConfigError("rate lambda must be positive");
    LossModel m;
    m.kind_ = LossKind::ZeroInflatedExponential;
    m.q_ = q;
    m.lambda_ = lambda;
    if (q < 1.0) m.atoms_.push_back({0.0, 1.0 - q});
    m.mean_ = q / lambda;
    return m;
}

LossModel LossModel::discrete(std::vector<double> xs, std::vector<double> ps) {
    if (xs.size() != ps.size() || xs.empty()) throw ConfigError("discrete model needs matching atoms/probabilities");
    std::vector<size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    LossModel m;
    m.kind_ = LossKind::Discrete;
    double tot = 0.0;
    for (size_t i : idx) {
        if (!(xs[i] >= 0.0)) throw ConfigError("loss atoms must be non-negative");
        if (!(ps[i] >= 0.0)) throw ConfigError("probabilities must be non-negative");
        if (!m.dx_.empty() && xs[i] == m.dx_.back()) {
            m.dp_.back() += ps[i];
        } else {
            m.dx_.push_back(xs[i]);
            m.dp_.push_back(ps[i]);
        }
        tot += ps[i];
    }
    if (std::abs(tot - 1.0) > 1e-12) throw ConfigError("discrete probabilities must sum to 1");
    for (size_t i = 0; i < m.dx_.size(); ++i) {
        if (m.dp_[i] > 0.0) m.atoms_.push_back({m.dx_[i], m.dp_[i]});
        m.mean_ += m.dx_[i] * m.dp_[i];
    }
    return m;
}

LossModel LossModel::truncated_density(double q, std::vector<double> xs, std::vector<double> fs) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("truncated density requires q in (0,1]");
    if (xs.size() != fs.size() || xs.size() < 2) throw ConfigError("density table needs at least two points");
    for (size_t i = 0; i + 1 < xs.size(); ++i)
        if (!(xs[i] < xs[i + 1])) throw ConfigError("density knots must be strictly increasing");
    if (!(xs.front() >= 0.0)) throw ConfigError("density support must be non-negative");
    for (double f : fs)
        if (!(f >= 0.0)) throw ConfigError("density values must be non-negative");

    LossModel m;
    m.kind_ = LossKind::TruncatedDensity;
    m.q_ = q;
    m.tx_ = std::move(xs);
    m.tf_ = std::move(fs);
    double raw = 0.0;
    for (size_t i = 0; i + 1 < m.tx_.size(); ++i)
        raw += 0.5 * (m.tf_[i] + m.tf_[i + 1]) * (m.tx_[i + 1] - m.tx_[i]);
    if (!(raw > 0.0)) throw ConfigError("density table integrates to zero");
    double scale = q / raw;
    for (auto& f : m.tf_) f *= scale;
    m.tcum_.assign(m.tx_.size(), 0.0);
    for (size_t i = 0; i + 1 < m.tx_.size(); ++i)
        m.tcum_[i + 1] = m.tcum_[i] + 0.5 * (m.tf_[i] + m.tf_[i + 1]) * (m.tx_[i + 1] - m.tx_[i]);
    m.tcum_.back() = q; // exact by construction, pin rounding
    if (q < 1.0) m.atoms_.push_back({0.0, 1.0 - q});
    m.mean_ = 0.0;
    for (size_t i = 0; i + 1 < m.tx_.size(); ++i) {
        double a = m.tx_[i], b = m.tx_[i + 1], fa = m.tf_[i], fb = m.tf_[i + 1];
        // exact first moment of a linear density segment
        m.mean_ += (b - a) * (fa * (2.0 * a + b) + fb * (a + 2.0 * b)) / 6.0;
    }
    return m;
}

double LossModel::survival(double x) const {
    if (x < 0.0) return 1.0;
    switch (kind_) {
    case LossKind::ZeroInflatedExponential:
        return q_ * std::exp(-lambda_ * x);
    case LossKind::Discrete: {
        double s = 0.0;
        for (size_t i = dx_.size(); i-- > 0;) {
            if (dx_[i] > x)
                s += dp_[i];
            else
                break;
        }
        return s;
    }
    case LossKind::TruncatedDensity: {
        if (x >= tx_.back()) return 0.0;
        if (x <= tx_.front()) return q_;
        auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
        size_t i = static_cast<size_t>(it - tx_.begin()) - 1;
        double a = tx_[i], fa = tf_[i], fb = tf_[i + 1];
        double slope = (fb - fa) / (tx_[i + 1] - a);
        double seg = fa * (x - a) + 0.5 * slope * (x - a) * (x - a);
        return q_ - (tcum_[i] + seg);
    }
    }
    return 0.0;
}

double LossModel::quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile argument outside [0,1]");
    switch (kind_) {
    case LossKind::ZeroInflatedExponential:
        if (p >= q_) return 0.0;
        if (p == 0.0) return kInf;
        return std::log(q_ / p) / lambda_;
    case LossKind::Discrete: {
        // inf{t : S(t) <= p}; S steps down at each atom
        double s = 1.0;
        for (size_t i = 0; i < dx_.size(); ++i) {
            s -= dp_[i];
            if (s <= p) return dx_[i];
        }
        return dx_.back();
    }
    case LossKind::TruncatedDensity: {
        if (p >= q_) return 0.0;
        if (p <= 0.0) return tx_.back();
        // solve S(x) = p on the segment where it brackets
        double target = q_ - p; // cumulative continuous mass
        auto it = std::lower_bound(tcum_.begin(), tcum_.end(), target);
        size_t i = static_cast<size_t>(it - tcum_.begin());
        if (i == 0) return tx_.front();
        if (i >= tcum_.size()) return tx_.back();
        double a = tx_[i - 1], fa = tf_[i - 1], fb = tf_[i];
        double h = tx_[i] - a;
        double slope = (fb - fa) / h;
        double rem = target - tcum_[i - 1];
        // fa*t + slope*t^2/2 = rem on t in [0, h]
        double t;
        if (std::abs(slope) < 1e-300) {
            t = fa > 0 ? rem / fa : h;
        } else {
            double disc = fa * fa + 2.0 * slope * rem;
            t = (-fa + std::sqrt(std::max(0.0, disc))) / slope;
            if (!(t >= 0.0 && t <= h)) t = fa > 0 ? rem / fa : h;
        }
        return a + std::min(std::max(t, 0.0), h);
    }
    }
    return 0.0;
}

double LossModel::mean() const { return mean_; }

double LossModel::ess_inf() const {
    switch (kind_) {
    case LossKind::ZeroInflatedExponential:
        return 0.0;
    case LossKind::Discrete:
        for (size_t i = 0; i < dx_.size(); ++i)
            if (dp_[i] > 0.0) return dx_[i];
        return 0.0;
    case LossKind::TruncatedDensity:
        return q_ < 1.0 ? 0.0 : tx_.front();
    }
    return 0.0;
}

double LossModel::support_bound() const {
    switch (kind_) {
    case LossKind::ZeroInflatedExponential:
        return kInf;
    case LossKind::Discrete:
        return dx_.back();
    case LossKind::TruncatedDensity:
        return tx_.back();
    }
    return kInf;
}

bool LossModel::has_density() const { return kind_ != LossKind::Discrete; }

double LossModel::density(double x) const {
    switch (kind_) {
    case LossKind::ZeroInflatedExponential:
        return x < 0.0 ? 0.0 : q_ * lambda_ * std::exp(-lambda_ * x);
    case LossKind::Discrete:
        return 0.0;
    case LossKind::TruncatedDensity: {
        if (x <= tx_.front() || x >= tx_.back()) return 0.0;
        auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
        size_t i = static_cast<size_t>(it - tx_.begin()) - 1;
        double w = (x - tx_[i]) / (tx_[i + 1] - tx_[i]);
        return tf_[i] * (1.0 - w) + tf_[i + 1] * w;
    }
    }
    return 0.0;
}

double LossModel::mass_at_zero() const {
    for (const auto& a : atoms_)
        if (a.x == 0.0) return a.p;
    return 0.0;
}

double LossModel::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (kind_) {
    case LossKind::ZeroInflatedExponential: {
        double u = unif(rng);
        if (u >= q_) return 0.0;
        // inverse survival keeps sampling fully deterministic per seed
        return std::log(q_ / std::max(u, 1e-300)) / lambda_;
    }
    case LossKind::Discrete: {
        double u = unif(rng);
        double acc = 0.0;
        for (size_t i = 0; i < dx_.size(); ++i) {
            acc += dp_[i];
            if (u <= acc) return dx_[i];
        }
        return dx_.back();
    }
    case LossKind::TruncatedDensity: {
        double u = unif(rng);
        if (u >= q_) return 0.0;
        return quantile(u);
    }
    }
    return 0.0;
}

} // namespace riskmetric
