#include "trav/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trav/error.hpp"
#include "trav/math_util.hpp"
#include "trav/parallel.hpp"
#include "trav/rng.hpp"
#include "trav/uncertainty.hpp"

namespace trav {

void ModelDims::validate() const {
    if (n_prompt < 1 || d_tok < 2 || hidden < 2) {
        throw std::invalid_argument("ModelDims: n_prompt >= 1, d_tok >= 2, hidden >= 2 required");
    }
    if (f_dim != kFeatureDim) {
        throw std::invalid_argument("ModelDims: f_dim must match the feature extractor");
    }
}

TokenBank::TokenBank(ModelDims dims, std::vector<double> params)
    : dims_(dims), params_(std::move(params)) {}

std::size_t TokenBank::mlp_size() const {
    const auto h = static_cast<std::size_t>(dims_.hidden);
    const auto d = static_cast<std::size_t>(dims_.d_tok);
    const auto f = static_cast<std::size_t>(dims_.f_dim);
    return h * d + h + f * h + f;
}

std::size_t TokenBank::prompt_offset(int i) const {
    return static_cast<std::size_t>(i) * dims_.d_tok;
}

std::size_t TokenBank::token_offset(int head) const {
    return (static_cast<std::size_t>(dims_.n_prompt) + head) * dims_.d_tok;
}

std::size_t TokenBank::mlp_offset(int head) const {
    return (static_cast<std::size_t>(dims_.n_prompt) + kNumHeads) * dims_.d_tok +
           static_cast<std::size_t>(head) * mlp_size();
}

std::size_t TokenBank::depth_offset() const { return mlp_offset(kNumHeads); }

std::span<const double> TokenBank::prompt_token(int i) const {
    return {params_.data() + prompt_offset(i), static_cast<std::size_t>(dims_.d_tok)};
}

std::span<const double> TokenBank::token(int head) const {
    return {params_.data() + token_offset(head), static_cast<std::size_t>(dims_.d_tok)};
}

namespace {

std::size_t total_params(const ModelDims& dims) {
    const auto d = static_cast<std::size_t>(dims.d_tok);
    const auto h = static_cast<std::size_t>(dims.hidden);
    const auto f = static_cast<std::size_t>(dims.f_dim);
    const std::size_t mlp = h * d + h + f * h + f;
    return (static_cast<std::size_t>(dims.n_prompt) + kNumHeads) * d + kNumHeads * mlp + f + 1;
}

}  // namespace

TokenBank TokenBank::init(const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    std::vector<double> params(total_params(dims), 0.0);
    TokenBank bank(dims, std::move(params));
    Rng rng(mix_seed(seed, 1));
    auto p = bank.parameters();

    const double token_scale = 1.0 / std::sqrt(static_cast<double>(dims.d_tok));
    for (int i = 0; i < dims.n_prompt + kNumHeads; ++i) {
        for (int j = 0; j < dims.d_tok; ++j) {
            p[static_cast<std::size_t>(i) * dims.d_tok + j] =
                rng.uniform(-1.0, 1.0) * token_scale;
        }
    }
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(dims.d_tok));
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    for (int head = 0; head < kNumHeads; ++head) {
        std::size_t off = bank.mlp_offset(head);
        for (int i = 0; i < dims.hidden * dims.d_tok; ++i) {
            p[off++] = rng.uniform(-1.0, 1.0) * w1_scale;
        }
        off += static_cast<std::size_t>(dims.hidden);  // b1 = 0
        for (int i = 0; i < dims.f_dim * dims.hidden; ++i) {
            p[off++] = rng.uniform(-1.0, 1.0) * w2_scale;
        }
        // b2 = 0
    }
    const double depth_scale = 1.0 / std::sqrt(static_cast<double>(dims.f_dim));
    std::size_t off = bank.depth_offset();
    for (int i = 0; i < dims.f_dim; ++i) {
        p[off++] = rng.uniform(-1.0, 1.0) * depth_scale;
    }
    // depth bias = 0
    return bank;
}

TokenBank TokenBank::from_parameters(const ModelDims& dims, std::vector<double> params) {
    dims.validate();
    if (params.size() != total_params(dims)) {
        throw std::invalid_argument("TokenBank: parameter count does not match dimensions");
    }
    for (double v : params) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("TokenBank: non-finite parameter");
        }
    }
    return TokenBank(dims, std::move(params));
}

namespace {

// Per-head forward intermediates needed by the backward pass.
struct HeadCache {
    std::vector<double> q_tilde;  // token + mean prompt
    std::vector<double> hidden;   // tanh activations
    std::vector<double> head_w;   // per-pixel projection weights (f_dim)
};

struct ForwardCache {
    std::vector<double> prompt_mean;
    std::array<HeadCache, kNumHeads> heads;
};

// w = mlp(token + prompt_mean)
void head_forward(const TokenBank& bank, int head, const std::vector<double>& prompt_mean,
                  HeadCache& cache) {
    const ModelDims& dims = bank.dims();
    const auto p = bank.parameters();
    const auto tok = bank.token(head);

    cache.q_tilde.resize(dims.d_tok);
    for (int j = 0; j < dims.d_tok; ++j) {
        cache.q_tilde[j] = tok[j] + prompt_mean[j];
    }

    std::size_t off = bank.mlp_offset(head);
    const double* w1 = p.data() + off;
    const double* b1 = w1 + static_cast<std::size_t>(dims.hidden) * dims.d_tok;
    const double* w2 = b1 + dims.hidden;
    const double* b2 = w2 + static_cast<std::size_t>(dims.f_dim) * dims.hidden;

    cache.hidden.resize(dims.hidden);
    for (int i = 0; i < dims.hidden; ++i) {
        double acc = b1[i];
        const double* row = w1 + static_cast<std::size_t>(i) * dims.d_tok;
        for (int j = 0; j < dims.d_tok; ++j) {
            acc += row[j] * cache.q_tilde[j];
        }
        cache.hidden[i] = std::tanh(acc);
    }
    cache.head_w.resize(dims.f_dim);
    for (int c = 0; c < dims.f_dim; ++c) {
        double acc = b2[c];
        const double* row = w2 + static_cast<std::size_t>(c) * dims.hidden;
        for (int i = 0; i < dims.hidden; ++i) {
            acc += row[i] * cache.hidden[i];
        }
        cache.head_w[c] = acc;
    }
}

DenseMap project_head(const FeatureMap& features, const std::vector<double>& head_w) {
    std::vector<double> out(features.pixel_count());
    parallel_rows(features.height, [&](int v) {
        for (int u = 0; u < features.width; ++u) {
            const double* px = features.pixel(v, u);
            double acc = 0.0;
            for (int c = 0; c < kFeatureDim; ++c) {
                acc += head_w[c] * px[c];
            }
            out[static_cast<std::size_t>(v) * features.width + u] = acc;
        }
    });
    return DenseMap::from_values(features.height, features.width, std::move(out));
}

// sum over pixels of upstream(px) * features(px, c), row-partials in order
std::vector<double> project_backward(const FeatureMap& features, const DenseMap& upstream) {
    std::vector<double> partial(static_cast<std::size_t>(features.height) * kFeatureDim, 0.0);
    parallel_rows(features.height, [&](int v) {
        double* row_acc = partial.data() + static_cast<std::size_t>(v) * kFeatureDim;
        for (int u = 0; u < features.width; ++u) {
            const double g = upstream.at(v, u);
            const double* px = features.pixel(v, u);
            for (int c = 0; c < kFeatureDim; ++c) {
                row_acc[c] += g * px[c];
            }
        }
    });
    std::vector<double> acc(kFeatureDim, 0.0);
    for (int v = 0; v < features.height; ++v) {
        const double* row_acc = partial.data() + static_cast<std::size_t>(v) * kFeatureDim;
        for (int c = 0; c < kFeatureDim; ++c) {
            acc[c] += row_acc[c];
        }
    }
    return acc;
}

// Accumulates gradients for one head given d(loss)/d(head_w), walking the MLP
// and conditioning chain backward.
void head_backward(const TokenBank& bank, int head, const HeadCache& cache,
                   const std::vector<double>& g_head_w, double scale,
                   std::vector<double>& grad, std::vector<double>& g_prompt_mean) {
    const ModelDims& dims = bank.dims();
    const auto p = bank.parameters();
    const std::size_t off = bank.mlp_offset(head);
    const double* w1 = p.data() + off;
    const double* w2 = w1 + static_cast<std::size_t>(dims.hidden) * dims.d_tok + dims.hidden;

    double* g_w1 = grad.data() + off;
    double* g_b1 = g_w1 + static_cast<std::size_t>(dims.hidden) * dims.d_tok;
    double* g_w2 = g_b1 + dims.hidden;
    double* g_b2 = g_w2 + static_cast<std::size_t>(dims.f_dim) * dims.hidden;

    // w2, b2
    for (int c = 0; c < dims.f_dim; ++c) {
        const double g = g_head_w[c] * scale;
        g_b2[c] += g;
        double* row = g_w2 + static_cast<std::size_t>(c) * dims.hidden;
        for (int i = 0; i < dims.hidden; ++i) {
            row[i] += g * cache.hidden[i];
        }
    }
    // hidden
    std::vector<double> g_hidden(dims.hidden, 0.0);
    for (int i = 0; i < dims.hidden; ++i) {
        double acc = 0.0;
        for (int c = 0; c < dims.f_dim; ++c) {
            acc += g_head_w[c] * w2[static_cast<std::size_t>(c) * dims.hidden + i];
        }
        g_hidden[i] = acc * (1.0 - cache.hidden[i] * cache.hidden[i]) * scale;
    }
    // w1, b1, q_tilde
    std::vector<double> g_q(dims.d_tok, 0.0);
    for (int i = 0; i < dims.hidden; ++i) {
        g_b1[i] += g_hidden[i];
        double* row = g_w1 + static_cast<std::size_t>(i) * dims.d_tok;
        const double* w_row = w1 + static_cast<std::size_t>(i) * dims.d_tok;
        for (int j = 0; j < dims.d_tok; ++j) {
            row[j] += g_hidden[i] * cache.q_tilde[j];
            g_q[j] += g_hidden[i] * w_row[j];
        }
    }
    double* g_token = grad.data() + bank.token_offset(head);
    for (int j = 0; j < dims.d_tok; ++j) {
        g_token[j] += g_q[j];
        g_prompt_mean[j] += g_q[j];
    }
}

DecodeResult decode_internal(const TokenBank& bank, const FeatureMap& features,
                             ForwardCache* cache_out) {
    const ModelDims& dims = bank.dims();
    ForwardCache local;
    ForwardCache& cache = cache_out ? *cache_out : local;

    cache.prompt_mean.assign(dims.d_tok, 0.0);
    for (int i = 0; i < dims.n_prompt; ++i) {
        const auto tok = bank.prompt_token(i);
        for (int j = 0; j < dims.d_tok; ++j) {
            cache.prompt_mean[j] += tok[j];
        }
    }
    for (int j = 0; j < dims.d_tok; ++j) {
        cache.prompt_mean[j] /= static_cast<double>(dims.n_prompt);
    }

    std::array<DenseMap, 5> maps{DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0),
                                 DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0)};
    for (int head = 0; head < kNumHeads; ++head) {
        head_forward(bank, head, cache.prompt_mean, cache.heads[head]);
        maps[head] = project_head(features, cache.heads[head].head_w);
    }

    // depth head: per-pixel linear map on features
    const auto p = bank.parameters();
    const double* dw = p.data() + bank.depth_offset();
    const double db = dw[dims.f_dim];
    std::vector<double> depth(features.pixel_count());
    parallel_rows(features.height, [&](int v) {
        for (int u = 0; u < features.width; ++u) {
            const double* px = features.pixel(v, u);
            double acc = db;
            for (int c = 0; c < kFeatureDim; ++c) {
                acc += dw[c] * px[c];
            }
            depth[static_cast<std::size_t>(v) * features.width + u] = acc;
        }
    });

    auto sigmoided = [](const DenseMap& logits) {
        std::vector<double> out(logits.size());
        const auto lv = logits.values();
        parallel_rows(logits.height(), [&](int v) {
            const std::size_t base = static_cast<std::size_t>(v) * logits.width();
            for (int u = 0; u < logits.width(); ++u) {
                out[base + u] = sigmoid(lv[base + u]);
            }
        });
        return UnitIntervalMap(DenseMap::from_values(logits.height(), logits.width(), std::move(out)));
    };

    return DecodeResult{
        {std::move(maps[0]), std::move(maps[1]), std::move(maps[2])},
        {maps[3], maps[4]},
        {sigmoided(maps[3]), sigmoided(maps[4])},
        DenseMap::from_values(features.height, features.width, std::move(depth))};
}

}  // namespace

DecodeResult decode(const TokenBank& tokens, const FeatureMap& features) {
    return decode_internal(tokens, features, nullptr);
}

PreparedSample prepare_sample(const TrainSample& sample, double beta, double teacher_noise_sigma,
                              std::uint64_t noise_seed) {
    FeatureMap features = extract_features(sample.rgb);
    require_same_shape(sample.rgb.r, sample.depth, "prepare_sample");
    require_same_shape(sample.rgb.r, sample.label.map(), "prepare_sample");

    DenseMap teacher = sample.depth;
    if (teacher_noise_sigma > 0.0) {
        Rng rng(mix_seed(noise_seed, 0xd3f7));
        std::vector<double> noised(teacher.values().begin(), teacher.values().end());
        for (double& d : noised) {
            d *= std::exp(teacher_noise_sigma * rng.normal());
        }
        teacher = DenseMap::from_values(teacher.height(), teacher.width(), std::move(noised));
    }
    PseudoRiskLabels pseudo = pseudo_risk_labels(teacher, sample.label, beta);
    return PreparedSample{std::move(features), sample.label, std::move(pseudo.slope),
                          std::move(pseudo.elevation), std::move(teacher)};
}

LossBreakdown model_loss(const TokenBank& tokens, const PreparedSample& sample,
                         const LossParams& params, std::vector<double>* grad_accum,
                         double grad_scale) {
    if (grad_accum && grad_accum->size() != tokens.parameter_count()) {
        throw std::invalid_argument("model_loss: gradient buffer size mismatch");
    }
    ForwardCache cache;
    DecodeResult decoded = decode_internal(tokens, sample.features, &cache);

    HypothesisSet hypotheses({decoded.semantic_logits[0], decoded.semantic_logits[1],
                              decoded.semantic_logits[2]},
                             params.perspectives);
    PdtLossResult sem = pdt_loss(hypotheses, sample.label, params.reduction);

    SmoothL1Result geo = smooth_l1_geo(decoded.risks[0].map(), decoded.risks[1].map(),
                                       sample.pseudo_slope.map(), sample.pseudo_elev.map(),
                                       params.geo_weights);
    SsiResult distill = ssi_loss(decoded.depth, sample.teacher_depth);

    LossBreakdown out;
    out.per_token = sem.per_token;
    out.sem = sem.total;
    out.geo = geo.value;
    out.distill = distill.value;
    out.total = total_loss(sem.total, geo.value, distill.value, params.geo_weights.lambda_geo);

    if (grad_accum) {
        std::vector<double>& grad = *grad_accum;
        const double lambda_geo = params.geo_weights.lambda_geo;
        std::vector<double> g_prompt_mean(tokens.dims().d_tok, 0.0);

        // semantic heads
        for (int k = 0; k < 3; ++k) {
            const std::vector<double> g_w = project_backward(sample.features, sem.grads[k]);
            head_backward(tokens, k, cache.heads[k], g_w, grad_scale, grad, g_prompt_mean);
        }
        // risk heads: chain through the decode-time sigmoid
        for (int c = 0; c < 2; ++c) {
            const DenseMap& logits = decoded.risk_logits[c];
            const DenseMap& g_risk = c == 0 ? geo.grad_slope : geo.grad_elev;
            std::vector<double> up(logits.size());
            const auto lv = logits.values();
            const auto gv = g_risk.values();
            parallel_rows(logits.height(), [&](int v) {
                const std::size_t base = static_cast<std::size_t>(v) * logits.width();
                for (int u = 0; u < logits.width(); ++u) {
                    const std::size_t i = base + u;
                    up[i] = lambda_geo * gv[i] * sigmoid(lv[i]) * sigmoid(-lv[i]);
                }
            });
            const DenseMap upstream =
                DenseMap::from_values(logits.height(), logits.width(), std::move(up));
            const std::vector<double> g_w = project_backward(sample.features, upstream);
            head_backward(tokens, 3 + c, cache.heads[3 + c], g_w, grad_scale, grad,
                          g_prompt_mean);
        }
        // depth head
        {
            std::vector<double> up(distill.grad.values().begin(), distill.grad.values().end());
            for (double& g : up) {
                g *= lambda_geo;
            }
            const DenseMap upstream = DenseMap::from_values(
                distill.grad.height(), distill.grad.width(), std::move(up));
            const std::vector<double> g_w = project_backward(sample.features, upstream);
            double g_b = 0.0;
            for (double g : upstream.values()) {
                g_b += g;
            }
            double* gd = grad.data() + tokens.depth_offset();
            for (int c = 0; c < tokens.dims().f_dim; ++c) {
                gd[c] += g_w[c] * grad_scale;
            }
            gd[tokens.dims().f_dim] += g_b * grad_scale;
        }
        // prompt tokens: each receives 1/n_prompt of the pooled conditioning gradient
        const double inv_np = 1.0 / static_cast<double>(tokens.dims().n_prompt);
        for (int i = 0; i < tokens.dims().n_prompt; ++i) {
            double* gp = grad.data() + tokens.prompt_offset(i);
            for (int j = 0; j < tokens.dims().d_tok; ++j) {
                gp[j] += g_prompt_mean[j] * inv_np;
            }
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
    if (!(lr_tokens > 0.0) || !(lr_depth_head > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    }
    if (weight_decay < 0.0) {
        throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    }
    dims.validate();
    for (const auto& c : loss.perspectives) {
        c.validate();
    }
    loss.geo_weights.validate();
    if (!(geometry_beta > 0.0)) {
        throw std::invalid_argument("TrainConfig: geometry_beta must be > 0");
    }
    if (teacher_noise_sigma < 0.0) {
        throw std::invalid_argument("TrainConfig: teacher_noise_sigma must be >= 0");
    }
}

TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("train: dataset is empty");
    }
    for (std::size_t i = 1; i < dataset.size(); ++i) {
        require_same_shape(dataset[0].rgb.r, dataset[i].rgb.r, "train");
    }

    std::vector<PreparedSample> prepared;
    prepared.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        prepared.push_back(prepare_sample(dataset[i], config.geometry_beta,
                                          config.teacher_noise_sigma,
                                          mix_seed(config.rng_seed, 2000 + i)));
    }

    TokenBank bank = TokenBank::init(config.dims, config.rng_seed);
    const std::size_t n_params = bank.parameter_count();
    std::vector<double> grad(n_params, 0.0);
    std::vector<double> adam_m(n_params, 0.0);
    std::vector<double> adam_v(n_params, 0.0);

    const std::size_t steps_per_epoch =
        (dataset.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
    const std::size_t depth_start = bank.depth_offset();

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<EpochLog> log;
    std::size_t step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(config.rng_seed, 1000 + epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        }

        EpochLog epoch_log;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            std::fill(grad.begin(), grad.end(), 0.0);

            LossBreakdown batch;
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    const LossBreakdown one =
                        model_loss(bank, prepared[order[i]], config.loss, &grad, inv_batch);
                    for (int k = 0; k < 3; ++k) {
                        batch.per_token[k] += one.per_token[k] * inv_batch;
                    }
                    batch.sem += one.sem * inv_batch;
                    batch.geo += one.geo * inv_batch;
                    batch.distill += one.distill * inv_batch;
                    batch.total += one.total * inv_batch;
                }
            } catch (const NumericError& e) {
                std::ostringstream msg;
                msg << "train: non-finite loss state at epoch " << epoch << " batch "
                    << begin / config.batch_size << " (sem=" << batch.sem << " geo=" << batch.geo
                    << " distill=" << batch.distill << "): " << e.what();
                throw NumericError(msg.str());
            }
            if (!std::isfinite(batch.total)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << " batch "
                    << begin / config.batch_size << " (sem=" << batch.sem << " geo=" << batch.geo
                    << " distill=" << batch.distill << ")";
                throw NumericError(msg.str());
            }

            // cosine-annealed AdamW step
            const double anneal =
                0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                      static_cast<double>(total_steps)));
            const double t = static_cast<double>(step + 1);
            const double bias1 = 1.0 - std::pow(config.beta1, t);
            const double bias2 = 1.0 - std::pow(config.beta2, t);
            auto params = bank.parameters();
            for (std::size_t i = 0; i < n_params; ++i) {
                const double g = grad[i];
                adam_m[i] = config.beta1 * adam_m[i] + (1.0 - config.beta1) * g;
                adam_v[i] = config.beta2 * adam_v[i] + (1.0 - config.beta2) * g * g;
                const double m_hat = adam_m[i] / bias1;
                const double v_hat = adam_v[i] / bias2;
                const double base_lr = i >= depth_start ? config.lr_depth_head : config.lr_tokens;
                const double lr = base_lr * anneal;
                params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) +
                                   config.weight_decay * params[i]);
            }
            ++step;

            const double w = static_cast<double>(end - begin) / static_cast<double>(order.size());
            epoch_log.l_con += batch.per_token[kConservative] * w;
            epoch_log.l_neu += batch.per_token[kNeutral] * w;
            epoch_log.l_agg += batch.per_token[kAggressive] * w;
            epoch_log.l_geo += batch.geo * w;
            epoch_log.l_distill += batch.distill * w;
        }
        epoch_log.total = epoch_log.l_con + epoch_log.l_neu + epoch_log.l_agg +
                          config.loss.geo_weights.lambda_geo *
                              (epoch_log.l_geo + epoch_log.l_distill);
        log.push_back(epoch_log);
    }
    return TrainResult{std::move(bank), std::move(log)};
}

TraversabilityOutput infer(const TokenBank& tokens, const RgbImage& image, double alpha,
                           double epsilon) {
    const FeatureMap features = extract_features(image);
    DecodeResult decoded = decode(tokens, features);
    HypothesisSet hypotheses({decoded.semantic_logits[0], decoded.semantic_logits[1],
                              decoded.semantic_logits[2]},
                             default_perspectives());
    auto [mean_p, variance] = mean_and_variance(hypotheses);
    UnitIntervalMap confidence = confidence_from_variance(variance, alpha, epsilon);
    UnitIntervalMap score = fuse(confidence, mean_p, decoded.risks[0], decoded.risks[1]);
    return TraversabilityOutput{std::move(mean_p),    std::move(confidence),
                                std::move(decoded.risks[0]), std::move(decoded.risks[1]),
                                std::move(score),     std::move(variance)};
}

namespace {

void put_u32_le(std::string& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
    }
}

void put_f64_le(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | p[i];
    }
    return std::bit_cast<double>(bits);
}

constexpr char kCheckpointMagic[4] = {'V', 'T', 'K', 'B'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TokenBank& tokens) {
    std::string buf;
    buf.reserve(32 + tokens.parameter_count() * 8);
    buf.append(kCheckpointMagic, 4);
    put_u32_le(buf, kCheckpointVersion);
    put_u32_le(buf, static_cast<std::uint32_t>(tokens.dims().n_prompt));
    put_u32_le(buf, static_cast<std::uint32_t>(tokens.dims().d_tok));
    put_u32_le(buf, static_cast<std::uint32_t>(tokens.dims().hidden));
    put_u32_le(buf, static_cast<std::uint32_t>(tokens.dims().f_dim));
    for (double p : tokens.parameters()) {
        put_f64_le(buf, p);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_checkpoint: cannot open " + path.string() + " for writing");
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoError("save_checkpoint: write failed for " + path.string());
    }
}

TokenBank load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_checkpoint: cannot open " + path.string());
    }
    unsigned char header[24];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (static_cast<std::size_t>(in.gcount()) != sizeof(header)) {
        throw FormatError("load_checkpoint: truncated header");
    }
    if (std::memcmp(header, kCheckpointMagic, 4) != 0) {
        throw FormatError("load_checkpoint: bad magic");
    }
    if (get_u32_le(header + 4) != kCheckpointVersion) {
        throw FormatError("load_checkpoint: unsupported format version");
    }
    ModelDims dims;
    dims.n_prompt = static_cast<int>(get_u32_le(header + 8));
    dims.d_tok = static_cast<int>(get_u32_le(header + 12));
    dims.hidden = static_cast<int>(get_u32_le(header + 16));
    dims.f_dim = static_cast<int>(get_u32_le(header + 20));
    if (dims.n_prompt < 1 || dims.n_prompt > 4096 || dims.d_tok < 2 || dims.d_tok > 65536 ||
        dims.hidden < 2 || dims.hidden > 65536 || dims.f_dim != kFeatureDim) {
        throw FormatError("load_checkpoint: implausible dimensions block");
    }
    const std::size_t count = total_params(dims);
    std::vector<unsigned char> payload(count * 8);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw FormatError("load_checkpoint: truncated parameter payload");
    }
    char extra = 0;
    if (in.get(extra)) {
        throw FormatError("load_checkpoint: trailing data after parameters");
    }
    std::vector<double> params(count);
    for (std::size_t i = 0; i < count; ++i) {
        params[i] = get_f64_le(payload.data() + i * 8);
        if (!std::isfinite(params[i])) {
            throw FormatError("load_checkpoint: non-finite parameter");
        }
    }
    return TokenBank::from_parameters(dims, std::move(params));
}

}  // namespace trav
