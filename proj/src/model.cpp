#include "cpsfuzz/model.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace cpsfuzz {

namespace {

constexpr char kModelMagic[8] = {'S', 'F', 'M', 'O', 'D', 'E', 'L', '1'};

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        int c = in.get();
        if (c == EOF) throw std::runtime_error("model file truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v), 8); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le(in, 8)); }

}  // namespace

std::string_view family_name(Family f) { return f == Family::Ridge ? "ridge" : "ffn"; }

Family parse_family(std::string_view name) {
    if (name == "ridge" || name == "linear-ridge") return Family::Ridge;
    if (name == "ffn" || name == "feedforward" || name == "small-feedforward") return Family::Feedforward;
    throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

NormStats NormStats::fit(const std::vector<TrainingVector>& train) {
    if (train.empty()) throw ContractViolation("cannot fit normalization on an empty set");
    NormStats st;
    Readings hi{};
    st.min = train.front().sensors;
    hi = train.front().sensors;
    for (const auto& v : train)
        for (std::size_t j = 0; j < kSensorCount; ++j) {
            st.min[j] = std::min(st.min[j], v.sensors[j]);
            hi[j] = std::max(hi[j], v.sensors[j]);
        }
    for (std::size_t j = 0; j < kSensorCount; ++j) {
        double w = hi[j] - st.min[j];
        st.scale[j] = w > 1e-12 ? w : 1.0;
    }
    return st;
}

Features make_features(const NormStats& stats, const Readings& snapshot, const ActuatorConfig& config) {
    Features x{};
    for (std::size_t j = 0; j < kSensorCount; ++j) x[j] = stats.normalize(j, snapshot[j]);
    for (std::size_t k = 0; k < kBinaryActuators; ++k)
        x[kSensorCount + k] = config.get(static_cast<ActuatorId>(k));
    x[kSensorCount + kBinaryActuators] = config.get(ActuatorId::MCV401) / 100.0;
    return x;
}

// ---- feedforward ----

std::size_t ffn_param_count(int hidden) {
    auto h = static_cast<std::size_t>(hidden);
    return h * kFeatureCount + h + h + 1;
}

double ffn_forward(const std::vector<double>& p, int hidden, const Features& x) {
    const auto h = static_cast<std::size_t>(hidden);
    const double* w1 = p.data();
    const double* b1 = w1 + h * kFeatureCount;
    const double* w2 = b1 + h;
    double out = w2[h];
    for (std::size_t i = 0; i < h; ++i) {
        double z = b1[i];
        for (std::size_t f = 0; f < kFeatureCount; ++f) z += w1[i * kFeatureCount + f] * x[f];
        out += w2[i] * std::tanh(z);
    }
    return out;
}

double ffn_loss_grad(const std::vector<double>& p, int hidden, const std::vector<Features>& xs,
                     const std::vector<double>& ys, std::vector<double>* grad) {
    const auto h = static_cast<std::size_t>(hidden);
    if (p.size() != ffn_param_count(hidden)) throw ContractViolation("ffn parameter count mismatch");
    if (xs.size() != ys.size() || xs.empty()) throw ContractViolation("ffn batch shape mismatch");
    const double* w1 = p.data();
    const double* b1 = w1 + h * kFeatureCount;
    const double* w2 = b1 + h;
    if (grad) grad->assign(p.size(), 0.0);
    double* g_w1 = grad ? grad->data() : nullptr;
    double* g_b1 = grad ? g_w1 + h * kFeatureCount : nullptr;
    double* g_w2 = grad ? g_b1 + h : nullptr;

    std::vector<double> act(h);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const auto& x = xs[n];
        double out = w2[h];
        for (std::size_t i = 0; i < h; ++i) {
            double z = b1[i];
            for (std::size_t f = 0; f < kFeatureCount; ++f) z += w1[i * kFeatureCount + f] * x[f];
            act[i] = std::tanh(z);
            out += w2[i] * act[i];
        }
        const double err = out - ys[n];
        loss += 0.5 * err * err * inv_n;
        if (!grad) continue;
        const double d_out = err * inv_n;
        g_w2[h] += d_out;
        for (std::size_t i = 0; i < h; ++i) {
            g_w2[i] += d_out * act[i];
            const double d_z = d_out * w2[i] * (1.0 - act[i] * act[i]);
            g_b1[i] += d_z;
            for (std::size_t f = 0; f < kFeatureCount; ++f) g_w1[i * kFeatureCount + f] += d_z * x[f];
        }
    }
    return loss;
}

// ---- entries ----

double clamp_physical(SensorId s, double v) {
    switch (s) {
        case SensorId::LIT101:
        case SensorId::LIT301:
        case SensorId::LIT401: return std::clamp(v, 0.0, 100.0);
        default: return std::max(v, 0.0);
    }
}

int default_interval(SensorId s) {
    return (s == SensorId::LIT101 || s == SensorId::LIT301 || s == SensorId::LIT401) ? 100 : 1;
}

double ModelEntry::predict_features(const Features& x) const {
    double z = 0.0;
    if (family == Family::Ridge) {
        z = params[0];
        for (std::size_t f = 0; f < kFeatureCount; ++f) z += params[1 + f] * x[f];
    } else {
        z = ffn_forward(params, hidden, x);
    }
    return clamp_physical(target, stats.denormalize(idx(target), z));
}

double ModelEntry::predict(const Readings& snapshot, const ActuatorConfig& config) const {
    return predict_features(make_features(stats, snapshot, config));
}

ModelEntry train(const std::vector<TrainingVector>& train_set, SensorId target, int interval, Family family,
                 const Hyperparams& hp) {
    if (train_set.size() < 50) throw ContractViolation("training needs at least 50 vectors");
    for (const auto& v : train_set)
        if (!std::isfinite(v.target)) throw ContractViolation("non-finite training target");

    ModelEntry e;
    e.target = target;
    e.interval = interval;
    e.family = family;
    e.stats = NormStats::fit(train_set);
    const std::size_t n = train_set.size();
    const std::size_t j = idx(target);

    if (family == Family::Ridge) {
        constexpr std::size_t cols = kFeatureCount + 1;
        Eigen::MatrixXd X(n, cols);
        Eigen::VectorXd y(n);
        for (std::size_t r = 0; r < n; ++r) {
            Features x = make_features(e.stats, train_set[r].sensors, train_set[r].actuators);
            X(static_cast<Eigen::Index>(r), 0) = 1.0;
            for (std::size_t f = 0; f < kFeatureCount; ++f)
                X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f + 1)) = x[f];
            y(static_cast<Eigen::Index>(r)) = e.stats.normalize(j, train_set[r].target);
        }
        Eigen::MatrixXd A = X.transpose() * X;
        for (std::size_t f = 1; f < cols; ++f)  // the intercept stays unpenalized
            A(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)) += hp.ridge_lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() != Eigen::Success) throw std::runtime_error("ridge system is singular");
        Eigen::VectorXd w = ldlt.solve(X.transpose() * y);
        if (!w.allFinite()) throw std::runtime_error("ridge system is ill-conditioned");
        e.params.assign(w.data(), w.data() + w.size());
        return e;
    }

    // Small feedforward net, minibatch gradient descent with a fixed seed.
    e.hidden = hp.hidden;
    const auto h = static_cast<std::size_t>(hp.hidden);
    std::mt19937_64 rng(hp.seed);
    e.params.assign(ffn_param_count(hp.hidden), 0.0);
    std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(double(kFeatureCount)),
                                              1.0 / std::sqrt(double(kFeatureCount)));
    std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(double(h)), 1.0 / std::sqrt(double(h)));
    for (std::size_t i = 0; i < h * kFeatureCount; ++i) e.params[i] = u1(rng);
    for (std::size_t i = 0; i < h; ++i) e.params[h * kFeatureCount + h + i] = u2(rng);

    std::vector<Features> xs(n);
    std::vector<double> ys(n);
    for (std::size_t r = 0; r < n; ++r) {
        xs[r] = make_features(e.stats, train_set[r].sensors, train_set[r].actuators);
        ys[r] = e.stats.normalize(j, train_set[r].target);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Features> bx;
    std::vector<double> by;
    std::vector<double> grad;
    const auto batch = static_cast<std::size_t>(std::max(1, hp.batch));
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t end = std::min(n, start + batch);
            bx.clear();
            by.clear();
            for (std::size_t k = start; k < end; ++k) {
                bx.push_back(xs[order[k]]);
                by.push_back(ys[order[k]]);
            }
            double loss = ffn_loss_grad(e.params, hp.hidden, bx, by, &grad);
            if (!std::isfinite(loss)) throw std::runtime_error("feedforward training diverged");
            for (std::size_t p = 0; p < e.params.size(); ++p) e.params[p] -= hp.learning_rate * grad[p];
        }
    }
    return e;
}

// ---- model ----

const ModelEntry& PredictionModel::entry(SensorId s) const {
    for (const auto& e : entries)
        if (e.target == s) return e;
    throw std::out_of_range("model has no entry for " + std::string(sensor_name(s)));
}

bool PredictionModel::has(SensorId s) const {
    return std::any_of(entries.begin(), entries.end(), [&](const ModelEntry& e) { return e.target == s; });
}

Readings PredictionModel::predict(const Readings& snapshot, const ActuatorConfig& config) const {
    Readings out{};
    for (auto s : all_sensors()) out[idx(s)] = entry(s).predict(snapshot, config);
    return out;
}

void PredictionModel::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write model '" + path + "'");
    f.write(kModelMagic, sizeof kModelMagic);
    put_le(f, entries.size(), 4);
    for (const auto& e : entries) {
        put_le(f, static_cast<std::uint8_t>(e.target), 1);
        put_le(f, static_cast<std::uint32_t>(e.interval), 4);
        put_le(f, static_cast<std::uint8_t>(e.family), 1);
        put_le(f, static_cast<std::uint32_t>(e.hidden), 4);
        put_le(f, e.params.size(), 4);
        for (double p : e.params) put_f64(f, p);
        for (double v : e.stats.min) put_f64(f, v);
        for (double v : e.stats.scale) put_f64(f, v);
    }
    if (!f) throw std::runtime_error("write failed for model '" + path + "'");
}

PredictionModel PredictionModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open model '" + path + "'");
    char magic[8];
    if (!f.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kModelMagic))
        throw std::runtime_error("'" + path + "' is not a model file");
    PredictionModel m;
    auto count = get_le(f, 4);
    if (count > kSensorCount) throw std::runtime_error("model file has too many entries");
    for (std::uint64_t i = 0; i < count; ++i) {
        ModelEntry e;
        auto target = get_le(f, 1);
        if (target >= kSensorCount) throw std::runtime_error("model file: bad target id");
        e.target = static_cast<SensorId>(target);
        e.interval = static_cast<int>(get_le(f, 4));
        auto fam = get_le(f, 1);
        if (fam != 1 && fam != 2) throw std::runtime_error("model file: bad family tag");
        e.family = static_cast<Family>(fam);
        e.hidden = static_cast<int>(get_le(f, 4));
        auto np = get_le(f, 4);
        std::size_t expect = e.family == Family::Ridge ? kFeatureCount + 1 : ffn_param_count(e.hidden);
        if (np != expect || e.interval < 1) throw std::runtime_error("model file: inconsistent entry");
        e.params.resize(np);
        for (auto& p : e.params) p = get_f64(f);
        for (auto& v : e.stats.min) v = get_f64(f);
        for (auto& v : e.stats.scale) v = get_f64(f);
        for (double p : e.params)
            if (!std::isfinite(p)) throw std::runtime_error("model file: non-finite parameter");
        m.entries.push_back(std::move(e));
    }
    return m;
}

// ---- evaluation ----

bool within_tolerance(double predicted, double actual, double tol, double floor) {
    return std::abs(predicted - actual) <= tol * std::max(std::abs(actual), floor);
}

double evaluate(const ModelEntry& entry, const std::vector<TrainingVector>& test, double tol, double floor) {
    if (test.empty()) throw ContractViolation("evaluation needs a non-empty test set");
    std::size_t hits = 0;
    for (const auto& v : test)
        if (within_tolerance(entry.predict(v.sensors, v.actuators), v.target, tol, floor)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

TrainOutcome train_all(const TimeSeriesLog& log, Family family, const Hyperparams& hp, double train_fraction,
                       int stride) {
    TrainOutcome out;
    for (auto s : all_sensors()) {
        int interval = default_interval(s);
        auto vectors = extract_vectors(log, s, interval, stride);
        auto [tr, te] = split(vectors, train_fraction);
        ModelEntry e = train(tr, s, interval, family, hp);
        out.report.fraction[idx(s)] = evaluate(e, te, out.report.tol, out.report.floor);
        out.report.interval[idx(s)] = interval;
        out.model.entries.push_back(std::move(e));
    }
    return out;
}

std::string summary_text(const PredictionModel& model, const AccuracyReport& report) {
    std::string s = fmt::format("# cpsfuzz model summary v1\n# tolerance {:.2f} relative, floor {:.2f}\n",
                                report.tol, report.floor);
    s += fmt::format("{:<8} {:>8} {:>7} {:>9}\n", "sensor", "interval", "family", "accuracy");
    for (const auto& e : model.entries) {
        const auto& frac = report.fraction[idx(e.target)];
        s += fmt::format("{:<8} {:>8} {:>7} {:>9}\n", sensor_name(e.target), e.interval, family_name(e.family),
                         frac ? fmt::format("{:.4f}", *frac) : std::string("n/a"));
    }
    return s;
}

}  // namespace cpsfuzz
