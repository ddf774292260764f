// SPDX-License-Identifier: Apache-2.0
#include "fastsae/train.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "fastsae/error.hpp"
#include "fastsae/init.hpp"

namespace fastsae {

// ---------------------------------------------------------------------------
// config

TrainConfig TrainConfig::full_scale(Arch arch) {
    TrainConfig c;
    c.arch = arch;
    c.sparsity_coefficient = arch == Arch::jumprelu ? 0.01 : 5.0;
    return c;
}

TrainConfig TrainConfig::desk_scale(Arch arch, std::uint64_t total_tokens) {
    TrainConfig c = full_scale(arch);
    c.total_train_tokens = total_tokens;
    const std::uint64_t steps = std::max<std::uint64_t>(1, c.total_steps());
    // Full-scale run: 320k steps, 16k warmup, 64k decay, 10k sparsity warmup.
    c.warmup_steps = std::max<std::uint64_t>(1, steps / 20);
    c.decay_steps = std::max<std::uint64_t>(1, steps / 5);
    c.sparsity_warmup_steps = std::max<std::uint64_t>(1, steps / 32);
    c.dead_window = std::max<std::uint64_t>(1, steps / 320);
    // A few thousand steps cannot travel far at the full-scale peak rate; keep the 10:1 peak/end ratio.
    c.lr = 1e-3;
    c.lr_end = 1e-4;
    return c;
}

void TrainConfig::validate() const {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw UsageError(std::string("invalid training config: ") + msg);
    };
    need(expansion_factor >= 1, "expansion_factor >= 1");
    need(lr_end > 0.0 && lr >= lr_end, "lr >= lr_end > 0");
    need(warmup_steps >= 1 && decay_steps >= 1, "warmup_steps, decay_steps >= 1");
    need(sparsity_warmup_steps >= 1, "sparsity_warmup_steps >= 1");
    need(train_batch_tokens >= 1 && total_train_tokens >= 1, "token counts >= 1");
    need(dead_window >= 1, "dead_window >= 1");
    need(sparsity_coefficient >= 0.0, "sparsity_coefficient >= 0");
    need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas in [0, 1)");
    need(adam_eps > 0.0, "adam_eps > 0");
    need(jumprelu_bandwidth > 0.0 && jumprelu_init_threshold > 0.0, "jumprelu bandwidth/threshold > 0");
    need(buffer_capacity >= 2 && buffer_capacity % 2 == 0, "buffer_capacity even and >= 2");
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <class F>
void for_each_field(TrainConfig& c, F&& f) {
    f("lr", c.lr);
    f("lr_end", c.lr_end);
    f("warmup_steps", c.warmup_steps);
    f("decay_steps", c.decay_steps);
    f("beta1", c.beta1);
    f("beta2", c.beta2);
    f("adam_eps", c.adam_eps);
    f("sparsity_coefficient", c.sparsity_coefficient);
    f("sparsity_warmup_steps", c.sparsity_warmup_steps);
    f("train_batch_tokens", c.train_batch_tokens);
    f("total_train_tokens", c.total_train_tokens);
    f("dead_threshold", c.dead_threshold);
    f("dead_window", c.dead_window);
    f("jumprelu_bandwidth", c.jumprelu_bandwidth);
    f("jumprelu_init_threshold", c.jumprelu_init_threshold);
    f("gm_ftol", c.gm_ftol);
    f("gm_max_iter", c.gm_max_iter);
    f("seed", c.seed);
    f("buffer_capacity", c.buffer_capacity);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': '" + v + "' is not a number");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    // Accept "4.096e7"-style integers as well as plain digits.
    const double d = parse_double(key, v);
    if (d < 0 || d != std::floor(d)) throw UsageError("config key '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
}

}  // namespace

std::map<std::string, std::string> TrainConfig::to_map() const {
    std::map<std::string, std::string> kv;
    TrainConfig copy = *this;
    for_each_field(copy, [&](const char* key, auto& field) {
        if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
            kv[key] = fmt_double(field);
        } else {
            kv[key] = std::to_string(field);
        }
    });
    kv["arch"] = std::string(arch_name(arch));
    kv["expansion_factor"] = std::to_string(expansion_factor);
    kv["normalize_decoder"] = normalize_decoder ? "true" : "false";
    kv["scheduler"] = std::string(schedule_mode_name(scheduler));
    return kv;
}

void TrainConfig::apply(const std::map<std::string, std::string>& kv) {
    // arch first so an explicit sparsity_coefficient in the same map wins over the arch default.
    if (auto it = kv.find("arch"); it != kv.end()) {
        const Arch a = parse_arch(it->second);
        if (a != arch) {
            arch = a;
            sparsity_coefficient = full_scale(a).sparsity_coefficient;
        }
    }
    for (const auto& [key, value] : kv) {
        if (key == "arch") continue;
        if (key == "expansion_factor") {
            expansion_factor = parse_u64(key, value);
            continue;
        }
        if (key == "normalize_decoder") {
            if (value != "true" && value != "false") throw UsageError("normalize_decoder must be true or false");
            normalize_decoder = value == "true";
            continue;
        }
        if (key == "scheduler") {
            scheduler = parse_schedule_mode(value);
            continue;
        }
        bool found = false;
        for_each_field(*this, [&](const char* name, auto& field) {
            if (key != name) return;
            found = true;
            if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
                field = parse_double(key, value);
            } else {
                field = parse_u64(key, value);
            }
        });
        if (!found) throw UsageError("unknown config key '" + key + "'");
    }
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

// ---------------------------------------------------------------------------
// schedules

double lr_at_step(std::uint64_t t, const TrainConfig& cfg) {
    const auto warm = static_cast<double>(cfg.warmup_steps);
    const auto decay = static_cast<double>(cfg.decay_steps);
    const auto s = static_cast<double>(t);
    if (s <= warm) return cfg.lr * s / warm;
    if (s <= warm + decay) {
        const double phase = (s - warm) / decay;
        return cfg.lr_end + (cfg.lr - cfg.lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
    }
    return cfg.lr_end;
}

double sparsity_coeff_at_step(std::uint64_t t, const TrainConfig& cfg) {
    if (t >= cfg.sparsity_warmup_steps) return cfg.sparsity_coefficient;
    return cfg.sparsity_coefficient * static_cast<double>(t) / static_cast<double>(cfg.sparsity_warmup_steps);
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const SaeParams& p) {
    AdamState s;
    s.m = SaeGrads<float>::zeros(p.arch, p.d_in, p.d_sae);
    s.v = SaeGrads<float>::zeros(p.arch, p.d_in, p.d_sae);
    return s;
}

namespace {

void adam_tensor(std::vector<float>& param, const std::vector<float>& grad, std::vector<float>& m,
                 std::vector<float>& v, float b1, float b2, float step, float corr2_sqrt, float eps) {
    const auto n = static_cast<std::ptrdiff_t>(param.size());
#pragma omp parallel for schedule(static) if (n > 16384)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const float g = grad[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        param[i] -= step * m[i] / (std::sqrt(v[i]) / corr2_sqrt + eps);
    }
}

}  // namespace

void adam_step(SaeParams& p, const SaeGrads<float>& g, AdamState& s, double lr, const AdamHyper& h) {
    if (g.d_in != p.d_in || g.d_sae != p.d_sae || g.arch != p.arch) {
        throw ContractError("adam_step: gradient shape does not match parameters");
    }
    if (s.m.d_in != p.d_in || s.m.d_sae != p.d_sae || s.m.arch != p.arch) {
        throw ContractError("adam_step: optimizer state shape does not match parameters");
    }
    s.t += 1;
    const double t = static_cast<double>(s.t);
    const double corr1 = 1.0 - std::pow(h.beta1, t);
    const double corr2 = 1.0 - std::pow(h.beta2, t);
    // p -= lr * (m / corr1) / (sqrt(v / corr2) + eps)
    const auto step = static_cast<float>(lr / corr1);
    const auto c2 = static_cast<float>(std::sqrt(corr2));
    const auto b1 = static_cast<float>(h.beta1);
    const auto b2 = static_cast<float>(h.beta2);
    const auto eps = static_cast<float>(h.eps);

    adam_tensor(p.w_enc, g.w_enc, s.m.w_enc, s.v.w_enc, b1, b2, step, c2, eps);
    adam_tensor(p.b_enc, g.b_enc, s.m.b_enc, s.v.b_enc, b1, b2, step, c2, eps);
    adam_tensor(p.w_dec, g.w_dec, s.m.w_dec, s.v.w_dec, b1, b2, step, c2, eps);
    adam_tensor(p.b_dec, g.b_dec, s.m.b_dec, s.v.b_dec, b1, b2, step, c2, eps);
    if (p.arch == Arch::jumprelu) {
        adam_tensor(p.threshold, g.threshold, s.m.threshold, s.v.threshold, b1, b2, step, c2, eps);
        for (float& th : p.threshold) th = std::max(th, h.threshold_floor);
    }
    if (h.normalize_decoder) normalize_decoder(p);
}

// ---------------------------------------------------------------------------
// dead features

DeadFeatureTracker::DeadFeatureTracker(std::size_t d_sae, std::uint64_t window, double threshold)
    : window_(window), threshold_(threshold), inactive_(d_sae, 0), batch_max_(d_sae) {
    if (window < 1) throw ContractError("dead feature window must be >= 1");
}

std::size_t DeadFeatureTracker::update(std::span<const float> acts, std::size_t rows) {
    const std::size_t d_sae = inactive_.size();
    if (acts.size() != rows * d_sae) throw ContractError("dead tracker: activation columns != d_sae");
    const auto n = static_cast<std::ptrdiff_t>(d_sae);
#pragma omp parallel for schedule(static) if (rows * d_sae > 65536)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        float mx = 0.0f;
        for (std::size_t b = 0; b < rows; ++b) mx = std::max(mx, acts[b * d_sae + k]);
        batch_max_[k] = mx;
    }
    for (std::size_t k = 0; k < d_sae; ++k) {
        if (static_cast<double>(batch_max_[k]) >= threshold_) {
            inactive_[k] = 0;
        } else {
            ++inactive_[k];
        }
    }
    return dead_count();
}

std::size_t DeadFeatureTracker::dead_count() const noexcept {
    std::size_t dead = 0;
    for (auto c : inactive_) dead += c >= window_ ? 1 : 0;
    return dead;
}

void write_metrics_line(std::ostream& os, const StepMetrics& m) {
    nlohmann::ordered_json j;
    j["step"] = m.step;
    j["total"] = m.total;
    j["mse_part"] = m.mse_part;
    j["sparsity_part"] = m.sparsity_part;
    j["lambda"] = m.lambda;
    j["lr"] = m.lr;
    j["dead_count"] = m.dead_count;
    os << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// loop

TrainResult train(const TrainConfig& cfg, RecordSource& source, const StepCallback& on_step, Exec exec) {
    cfg.validate();
    const std::size_t d_in = source.d_in();
    const std::size_t d_sae = d_in * cfg.expansion_factor;
    const std::size_t batch = cfg.train_batch_tokens;
    const std::uint64_t max_steps = cfg.total_steps();

    MixingBuffer buffer(d_in, cfg.buffer_capacity, derive_seed(cfg.seed, 0x627566));  // "buf"
    const FillResult first = buffer.fill(source);
    if (first.added == 0) throw ContractError("activation source is empty; nothing to train on");

    InitConfig icfg;
    icfg.arch = cfg.arch;
    icfg.d_sae = d_sae;
    icfg.seed = cfg.seed;
    icfg.init_threshold = static_cast<float>(cfg.jumprelu_init_threshold);
    icfg.normalize_decoder = cfg.normalize_decoder;
    icfg.gm_ftol = cfg.gm_ftol;
    icfg.gm_max_iter = cfg.gm_max_iter;
    InitReport irep;

    TrainResult res;
    res.params = init_sae(icfg, buffer.contents(), &irep);
    res.gm_iterations = irep.gm_iterations;
    res.gm_converged = irep.gm_converged;

    AdamState adam = AdamState::for_params(res.params);
    AdamHyper hyper{cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.normalize_decoder};
    DeadFeatureTracker dead(d_sae, cfg.dead_window, cfg.dead_threshold);
    SaeGrads<float> grads = SaeGrads<float>::zeros(cfg.arch, d_in, d_sae);
    Workspace<float> ws;

    ActivationBatch pending(d_in);
    bool source_done = first.exhausted;

    while (res.steps < max_steps) {
        ActivationBatch drained = buffer.full() ? buffer.shuffle_and_drain() : buffer.flush();
        if (drained.empty() && pending.rows() < batch) break;
        pending.append_rows(drained, 0, drained.rows());

        std::size_t offset = 0;
        while (pending.rows() - offset >= batch && res.steps < max_steps) {
            const std::uint64_t t = res.steps + 1;
            const double lr = lr_at_step(t, cfg);
            const double lambda = sparsity_coeff_at_step(t, cfg);
            auto x = pending.values().subspan(offset * d_in, batch * d_in);
            const auto parts = backward_batch<float>(res.params, x, batch, static_cast<float>(lambda),
                                                     static_cast<float>(cfg.jumprelu_bandwidth), grads, ws, exec);
            const std::size_t dead_now = dead.update(ws.act, batch);
            adam_step(res.params, grads, adam, lr, hyper);

            StepMetrics m{t, parts.total, parts.mse_part, parts.sparsity_part, lambda, lr, dead_now};
            res.log.push_back(m);
            if (on_step) on_step(m);
            res.steps = t;
            res.tokens_consumed += batch;
            offset += batch;
        }
        pending.erase_front(offset);

        if (source_done) {
            if (buffer.size() == 0) break;
            continue;  // flush whatever is left on the next pass
        }
        const FillResult fr = buffer.fill(source);
        source_done = fr.exhausted;
    }
    return res;
}

}  // namespace fastsae
