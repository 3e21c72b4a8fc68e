#include "mdlab/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mdlab/errors.hpp"
#include "mdlab/kernels.hpp"
#include "mdlab/normal.hpp"

namespace mdlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLnEps = 1e-5;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gelu(double x) { return x * normal_cdf(x, 0.0, 1.0); }

double gelu_prime(double x) { return normal_cdf(x, 0.0, 1.0) + x * normal_pdf(x, 0.0, 1.0); }

double silu_prime(double x) {
    double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

void add_bias(double* c, int rows, int cols, const double* bias) {
    for (int s = 0; s < rows; ++s) {
        double* row = c + static_cast<size_t>(s) * cols;
        for (int j = 0; j < cols; ++j) {
            row[j] += bias[j];
        }
    }
}

void col_sum_accum(const double* m, int rows, int cols, double* out) {
    for (int s = 0; s < rows; ++s) {
        const double* row = m + static_cast<size_t>(s) * cols;
        for (int j = 0; j < cols; ++j) {
            out[j] += row[j];
        }
    }
}

// Affine-free layer norm per row: xhat = (x - mean) / sqrt(var + eps).
void ln_rows(const double* x, int rows, int cols, double* xhat, double* rstd) {
    for (int s = 0; s < rows; ++s) {
        const double* row = x + static_cast<size_t>(s) * cols;
        double* out = xhat + static_cast<size_t>(s) * cols;
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) {
            mean += row[j];
        }
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            double d = row[j] - mean;
            var += d * d;
        }
        var /= cols;
        double r = 1.0 / std::sqrt(var + kLnEps);
        rstd[s] = r;
        for (int j = 0; j < cols; ++j) {
            out[j] = (row[j] - mean) * r;
        }
    }
}

// dx += rstd * (dy - mean(dy) - xhat * mean(dy .* xhat)), per row.
void ln_backward_accum(const double* dy, const double* xhat, const double* rstd, int rows,
                       int cols, double* dx) {
    for (int s = 0; s < rows; ++s) {
        const double* dyr = dy + static_cast<size_t>(s) * cols;
        const double* xr = xhat + static_cast<size_t>(s) * cols;
        double* dxr = dx + static_cast<size_t>(s) * cols;
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < cols; ++j) {
            m1 += dyr[j];
            m2 += dyr[j] * xr[j];
        }
        m1 /= cols;
        m2 /= cols;
        for (int j = 0; j < cols; ++j) {
            dxr[j] += rstd[s] * (dyr[j] - m1 - xr[j] * m2);
        }
    }
}

void extract_cols(const double* src, int rows, int cols, int c0, int width, double* dst) {
    for (int s = 0; s < rows; ++s) {
        std::memcpy(dst + static_cast<size_t>(s) * width,
                    src + static_cast<size_t>(s) * cols + c0, sizeof(double) * width);
    }
}

void scatter_cols(const double* src, int rows, int width, double* dst, int cols, int c0) {
    for (int s = 0; s < rows; ++s) {
        std::memcpy(dst + static_cast<size_t>(s) * cols + c0,
                    src + static_cast<size_t>(s) * width, sizeof(double) * width);
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (layers < 1 || hidden_dim < 1 || heads < 1 || ffn_dim < 1 || max_seq_len < 1) {
        throw std::invalid_argument("model config: all dimensions must be positive");
    }
    if (hidden_dim % heads != 0) {
        throw std::invalid_argument("model config: hidden_dim must be divisible by heads");
    }
    if (timestep_dim < 2 || timestep_dim % 2 != 0) {
        throw std::invalid_argument("model config: timestep_dim must be even and >= 2");
    }
    if (vocab_size < 6) {
        throw std::invalid_argument("model config: vocab_size must exceed the 5 special ids");
    }
}

std::vector<double> timestep_embedding(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw std::domain_error("timestep_embedding: dim must be even and >= 2");
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::domain_error("timestep_embedding: t must be in [0,1]");
    }
    const int half = dim / 2;
    const double w_max = 1000.0;
    const double w_min = 2.0 * kPi / 1e4;  // max period 1e4
    std::vector<double> emb(dim);
    for (int i = 0; i < half; ++i) {
        double frac = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
        double w = w_max * std::pow(w_min / w_max, frac);
        emb[i] = std::sin(w * t);
        emb[half + i] = std::cos(w * t);
    }
    return emb;
}

Model::Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    const int64_t H = config_.hidden_dim, V = config_.vocab_size, S = config_.max_seq_len,
                  F = config_.ffn_dim, Dt = config_.timestep_dim;
    const double base = 0.02;
    const double resid = base / std::sqrt(2.0 * config_.layers);

    int64_t cursor = 0;
    auto add = [&](const std::string& name, int64_t size, bool decay, double stddev) {
        infos_.push_back(ParamInfo{name, cursor, size, decay, stddev});
        int64_t off = cursor;
        cursor += size;
        return off;
    };

    off_tok_embed_ = add("tok_embed", V * H, true, base);
    off_pos_embed_ = add("pos_embed", S * H, true, base);
    off_head_bias_ = add("head_bias", V, false, 0.0);
    layer_off_.resize(config_.layers);
    for (int i = 0; i < config_.layers; ++i) {
        const std::string pre = "layer" + std::to_string(i) + ".";
        LayerOffsets& o = layer_off_[i];
        o.cond_w1 = add(pre + "cond_w1", Dt * H, true, base);
        o.cond_b1 = add(pre + "cond_b1", H, false, 0.0);
        o.cond_w2 = add(pre + "cond_w2", H * 6 * H, true, 0.0);  // AdaLN-zero
        o.cond_b2 = add(pre + "cond_b2", 6 * H, false, 0.0);
        o.wq = add(pre + "wq", H * H, true, base);
        o.bq = add(pre + "bq", H, false, 0.0);
        o.wk = add(pre + "wk", H * H, true, base);
        o.bk = add(pre + "bk", H, false, 0.0);
        o.wv = add(pre + "wv", H * H, true, base);
        o.bv = add(pre + "bv", H, false, 0.0);
        o.wo = add(pre + "wo", H * H, true, resid);
        o.bo = add(pre + "bo", H, false, 0.0);
        o.ffn_w1 = add(pre + "ffn_w1", H * F, true, base);
        o.ffn_b1 = add(pre + "ffn_b1", F, false, 0.0);
        o.ffn_w2 = add(pre + "ffn_w2", F * H, true, resid);
        o.ffn_b2 = add(pre + "ffn_b2", H, false, 0.0);
    }
    params_.assign(static_cast<size_t>(cursor), 0.0);
}

int64_t Model::expected_param_count(const ModelConfig& cfg) {
    const int64_t V = cfg.vocab_size, H = cfg.hidden_dim, S = cfg.max_seq_len, L = cfg.layers,
                  F = cfg.ffn_dim, Dt = cfg.timestep_dim;
    const int64_t per_layer = (Dt * H + H) + (H * 6 * H + 6 * H) + 4 * (H * H + H) +
                              (H * F + F) + (F * H + H);
    return V * H + S * H + V + L * per_layer;
}

const ParamInfo& Model::param_info(const std::string& name) const {
    for (const ParamInfo& info : infos_) {
        if (info.name == name) {
            return info;
        }
    }
    throw std::invalid_argument("model: no parameter named " + name);
}

void Model::init_parameters(Rng& rng) {
    for (const ParamInfo& info : infos_) {
        double* dst = params_.data() + info.offset;
        if (info.init_stddev == 0.0) {
            std::memset(dst, 0, sizeof(double) * static_cast<size_t>(info.size));
        } else {
            for (int64_t i = 0; i < info.size; ++i) {
                dst[i] = rng.normal() * info.init_stddev;
            }
        }
    }
}

void Model::forward(const std::vector<int>& tokens, double t, std::vector<double>& logits,
                    ForwardCache* cache) const {
    if (cache != nullptr) {
        forward_impl(tokens, t, logits, *cache);
    } else {
        ForwardCache local;
        forward_impl(tokens, t, logits, local);
    }
}

void Model::forward_impl(const std::vector<int>& tokens, double t, std::vector<double>& logits,
                         ForwardCache& c) const {
    namespace k = kernels;
    const int S = static_cast<int>(tokens.size());
    const int H = config_.hidden_dim, V = config_.vocab_size, F = config_.ffn_dim;
    const int nh = config_.heads, dh = config_.head_dim(), Dt = config_.timestep_dim;

    if (S == 0) {
        throw DataError("model forward: empty sequence");
    }
    if (S > config_.max_seq_len) {
        throw DataError("model forward: sequence length " + std::to_string(S) +
                        " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
    }
    for (int id : tokens) {
        if (id < 0 || id >= V) {
            throw DataError("model forward: token id " + std::to_string(id) + " out of range");
        }
    }

    const double t_in = config_.time_conditioning ? t : kFixedTimeInput;
    c.tokens = tokens;
    c.seq_len = S;
    c.t_input = t_in;
    c.temb = timestep_embedding(t_in, Dt);
    c.layers.assign(config_.layers, LayerCache{});

    const size_t sh = static_cast<size_t>(S) * H;
    const double* tok_e = params_.data() + off_tok_embed_;
    const double* pos_e = params_.data() + off_pos_embed_;

    std::vector<double> x(sh);
    for (int s = 0; s < S; ++s) {
        const double* te = tok_e + static_cast<size_t>(tokens[s]) * H;
        const double* pe = pos_e + static_cast<size_t>(s) * H;
        double* xr = x.data() + static_cast<size_t>(s) * H;
        for (int j = 0; j < H; ++j) {
            xr[j] = te[j] + pe[j];
        }
    }

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> qh(static_cast<size_t>(S) * dh), kh(qh.size()), vh(qh.size()),
        ah(qh.size()), scores(static_cast<size_t>(S) * S);

    for (int li = 0; li < config_.layers; ++li) {
        LayerCache& L = c.layers[li];
        const LayerOffsets& o = layer_off_[li];
        L.x_in = x;

        // Modulation MLP: timestep embedding -> shift/scale/gate per sublayer.
        L.cond_pre.resize(H);
        k::gemm_nn(1, H, Dt, c.temb.data(), params_.data() + o.cond_w1, L.cond_pre.data());
        for (int j = 0; j < H; ++j) {
            L.cond_pre[j] += params_[o.cond_b1 + j];
        }
        L.cond_act.resize(H);
        for (int j = 0; j < H; ++j) {
            L.cond_act[j] = L.cond_pre[j] * sigmoid(L.cond_pre[j]);
        }
        L.mods.resize(static_cast<size_t>(6) * H);
        k::gemm_nn(1, 6 * H, H, L.cond_act.data(), params_.data() + o.cond_w2, L.mods.data());
        for (int j = 0; j < 6 * H; ++j) {
            L.mods[j] += params_[o.cond_b2 + j];
        }
        const double* shift_a = L.mods.data();
        const double* scale_a = L.mods.data() + H;
        const double* gate_a = L.mods.data() + 2 * H;
        const double* shift_f = L.mods.data() + 3 * H;
        const double* scale_f = L.mods.data() + 4 * H;
        const double* gate_f = L.mods.data() + 5 * H;

        // Attention sublayer.
        L.ln1_xhat.resize(sh);
        L.ln1_rstd.resize(S);
        ln_rows(x.data(), S, H, L.ln1_xhat.data(), L.ln1_rstd.data());
        L.mod1.resize(sh);
        for (int s = 0; s < S; ++s) {
            const double* xr = L.ln1_xhat.data() + static_cast<size_t>(s) * H;
            double* mr = L.mod1.data() + static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                mr[j] = (1.0 + scale_a[j]) * xr[j] + shift_a[j];
            }
        }
        L.q.resize(sh);
        L.k.resize(sh);
        L.v.resize(sh);
        k::gemm_nn(S, H, H, L.mod1.data(), params_.data() + o.wq, L.q.data());
        add_bias(L.q.data(), S, H, params_.data() + o.bq);
        k::gemm_nn(S, H, H, L.mod1.data(), params_.data() + o.wk, L.k.data());
        add_bias(L.k.data(), S, H, params_.data() + o.bk);
        k::gemm_nn(S, H, H, L.mod1.data(), params_.data() + o.wv, L.v.data());
        add_bias(L.v.data(), S, H, params_.data() + o.bv);

        L.attn_probs.resize(static_cast<size_t>(nh) * S * S);
        L.att_concat.resize(sh);
        for (int h = 0; h < nh; ++h) {
            extract_cols(L.q.data(), S, H, h * dh, dh, qh.data());
            extract_cols(L.k.data(), S, H, h * dh, dh, kh.data());
            extract_cols(L.v.data(), S, H, h * dh, dh, vh.data());
            k::gemm_nt(S, S, dh, qh.data(), kh.data(), scores.data());
            double* probs = L.attn_probs.data() + static_cast<size_t>(h) * S * S;
            for (int s = 0; s < S; ++s) {
                double* row = scores.data() + static_cast<size_t>(s) * S;
                double max = row[0] * inv_sqrt_dh;
                for (int j = 0; j < S; ++j) {
                    row[j] *= inv_sqrt_dh;
                    if (row[j] > max) {
                        max = row[j];
                    }
                }
                double sum = 0.0;
                double* prow = probs + static_cast<size_t>(s) * S;
                for (int j = 0; j < S; ++j) {
                    prow[j] = std::exp(row[j] - max);
                    sum += prow[j];
                }
                double inv = 1.0 / sum;
                for (int j = 0; j < S; ++j) {
                    prow[j] *= inv;
                }
            }
            k::gemm_nn(S, dh, S, probs, vh.data(), ah.data());
            scatter_cols(ah.data(), S, dh, L.att_concat.data(), H, h * dh);
        }
        L.attn_out.resize(sh);
        k::gemm_nn(S, H, H, L.att_concat.data(), params_.data() + o.wo, L.attn_out.data());
        add_bias(L.attn_out.data(), S, H, params_.data() + o.bo);

        L.x_mid.resize(sh);
        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                L.x_mid[r + j] = L.x_in[r + j] + gate_a[j] * L.attn_out[r + j];
            }
        }

        // FFN sublayer.
        L.ln2_xhat.resize(sh);
        L.ln2_rstd.resize(S);
        ln_rows(L.x_mid.data(), S, H, L.ln2_xhat.data(), L.ln2_rstd.data());
        L.mod2.resize(sh);
        for (int s = 0; s < S; ++s) {
            const double* xr = L.ln2_xhat.data() + static_cast<size_t>(s) * H;
            double* mr = L.mod2.data() + static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                mr[j] = (1.0 + scale_f[j]) * xr[j] + shift_f[j];
            }
        }
        L.ffn_pre.resize(static_cast<size_t>(S) * F);
        k::gemm_nn(S, F, H, L.mod2.data(), params_.data() + o.ffn_w1, L.ffn_pre.data());
        add_bias(L.ffn_pre.data(), S, F, params_.data() + o.ffn_b1);
        L.ffn_act.resize(L.ffn_pre.size());
        for (size_t i = 0; i < L.ffn_pre.size(); ++i) {
            L.ffn_act[i] = gelu(L.ffn_pre[i]);
        }
        L.ffn_out.resize(sh);
        k::gemm_nn(S, H, F, L.ffn_act.data(), params_.data() + o.ffn_w2, L.ffn_out.data());
        add_bias(L.ffn_out.data(), S, H, params_.data() + o.ffn_b2);

        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                x[r + j] = L.x_mid[r + j] + gate_f[j] * L.ffn_out[r + j];
            }
        }
    }

    c.x_final = x;
    c.lnf_xhat.resize(sh);
    c.lnf_rstd.resize(S);
    ln_rows(x.data(), S, H, c.lnf_xhat.data(), c.lnf_rstd.data());

    logits.resize(static_cast<size_t>(S) * V);
    k::gemm_nt(S, V, H, c.lnf_xhat.data(), tok_e, logits.data());
    add_bias(logits.data(), S, V, params_.data() + off_head_bias_);

    for (double value : logits) {
        if (!std::isfinite(value)) {
            throw NumericError("model forward: non-finite logit");
        }
    }
}

void Model::backward(const ForwardCache& c, const std::vector<double>& dlogits,
                     std::vector<double>& grad) const {
    namespace k = kernels;
    const int S = c.seq_len;
    const int H = config_.hidden_dim, V = config_.vocab_size, F = config_.ffn_dim;
    const int nh = config_.heads, dh = config_.head_dim(), Dt = config_.timestep_dim;
    const size_t sh = static_cast<size_t>(S) * H;

    if (grad.size() != params_.size()) {
        throw std::invalid_argument("model backward: grad buffer size mismatch");
    }
    if (dlogits.size() != static_cast<size_t>(S) * V) {
        throw std::invalid_argument("model backward: dlogits shape mismatch");
    }

    // Output head (weight-tied with the token embedding).
    std::vector<double> dx(sh, 0.0);
    {
        std::vector<double> dlnf(sh);
        k::gemm_nn(S, H, V, dlogits.data(), params_.data() + off_tok_embed_, dlnf.data());
        k::gemm_tn(S, H, V, dlogits.data(), c.lnf_xhat.data(), grad.data() + off_tok_embed_, true);
        col_sum_accum(dlogits.data(), S, V, grad.data() + off_head_bias_);
        ln_backward_accum(dlnf.data(), c.lnf_xhat.data(), c.lnf_rstd.data(), S, H, dx.data());
    }

    std::vector<double> dbranch(sh), dmid(sh), dmod(sh);
    std::vector<double> dffn_act(static_cast<size_t>(S) * F), dffn_pre(dffn_act.size());
    std::vector<double> dq(sh), dk(sh), dv(sh), datt(sh);
    std::vector<double> qh(static_cast<size_t>(S) * dh), kh(qh.size()), vh(qh.size()),
        dah(qh.size()), dqh(qh.size()), dkh(qh.size()), dvh(qh.size());
    std::vector<double> dprobs(static_cast<size_t>(S) * S), dscores(dprobs.size());
    std::vector<double> dmods(static_cast<size_t>(6) * H), dcond_act(H), dcond_pre(H);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int li = config_.layers - 1; li >= 0; --li) {
        const LayerCache& L = c.layers[li];
        const LayerOffsets& o = layer_off_[li];
        const double* scale_a = L.mods.data() + H;
        const double* gate_a = L.mods.data() + 2 * H;
        const double* scale_f = L.mods.data() + 4 * H;
        const double* gate_f = L.mods.data() + 5 * H;
        std::fill(dmods.begin(), dmods.end(), 0.0);
        double* dshift_a = dmods.data();
        double* dscale_a = dmods.data() + H;
        double* dgate_a = dmods.data() + 2 * H;
        double* dshift_f = dmods.data() + 3 * H;
        double* dscale_f = dmods.data() + 4 * H;
        double* dgate_f = dmods.data() + 5 * H;

        // FFN sublayer: x_out = x_mid + gate_f .* ffn_out.
        dmid = dx;
        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                dgate_f[j] += dx[r + j] * L.ffn_out[r + j];
                dbranch[r + j] = dx[r + j] * gate_f[j];
            }
        }
        k::gemm_nt(S, F, H, dbranch.data(), params_.data() + o.ffn_w2, dffn_act.data());
        k::gemm_tn(S, H, F, L.ffn_act.data(), dbranch.data(), grad.data() + o.ffn_w2, true);
        col_sum_accum(dbranch.data(), S, H, grad.data() + o.ffn_b2);
        for (size_t i = 0; i < dffn_act.size(); ++i) {
            dffn_pre[i] = dffn_act[i] * gelu_prime(L.ffn_pre[i]);
        }
        k::gemm_nt(S, H, F, dffn_pre.data(), params_.data() + o.ffn_w1, dmod.data());
        k::gemm_tn(S, F, H, L.mod2.data(), dffn_pre.data(), grad.data() + o.ffn_w1, true);
        col_sum_accum(dffn_pre.data(), S, F, grad.data() + o.ffn_b1);
        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                dscale_f[j] += dmod[r + j] * L.ln2_xhat[r + j];
                dshift_f[j] += dmod[r + j];
                dbranch[r + j] = dmod[r + j] * (1.0 + scale_f[j]);
            }
        }
        ln_backward_accum(dbranch.data(), L.ln2_xhat.data(), L.ln2_rstd.data(), S, H, dmid.data());

        // Attention sublayer: x_mid = x_in + gate_a .* attn_out.
        dx = dmid;
        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                dgate_a[j] += dmid[r + j] * L.attn_out[r + j];
                dbranch[r + j] = dmid[r + j] * gate_a[j];
            }
        }
        k::gemm_nt(S, H, H, dbranch.data(), params_.data() + o.wo, datt.data());
        k::gemm_tn(S, H, H, L.att_concat.data(), dbranch.data(), grad.data() + o.wo, true);
        col_sum_accum(dbranch.data(), S, H, grad.data() + o.bo);

        for (int h = 0; h < nh; ++h) {
            const double* probs = L.attn_probs.data() + static_cast<size_t>(h) * S * S;
            extract_cols(L.q.data(), S, H, h * dh, dh, qh.data());
            extract_cols(L.k.data(), S, H, h * dh, dh, kh.data());
            extract_cols(L.v.data(), S, H, h * dh, dh, vh.data());
            extract_cols(datt.data(), S, H, h * dh, dh, dah.data());
            k::gemm_nt(S, S, dh, dah.data(), vh.data(), dprobs.data());
            k::gemm_tn(S, dh, S, probs, dah.data(), dvh.data());
            for (int s = 0; s < S; ++s) {
                const double* prow = probs + static_cast<size_t>(s) * S;
                const double* dprow = dprobs.data() + static_cast<size_t>(s) * S;
                double* dsrow = dscores.data() + static_cast<size_t>(s) * S;
                double r = k::dot(dprow, prow, S);
                for (int j = 0; j < S; ++j) {
                    dsrow[j] = prow[j] * (dprow[j] - r) * inv_sqrt_dh;
                }
            }
            k::gemm_nn(S, dh, S, dscores.data(), kh.data(), dqh.data());
            k::gemm_tn(S, dh, S, dscores.data(), qh.data(), dkh.data());
            scatter_cols(dqh.data(), S, dh, dq.data(), H, h * dh);
            scatter_cols(dkh.data(), S, dh, dk.data(), H, h * dh);
            scatter_cols(dvh.data(), S, dh, dv.data(), H, h * dh);
        }

        k::gemm_tn(S, H, H, L.mod1.data(), dq.data(), grad.data() + o.wq, true);
        col_sum_accum(dq.data(), S, H, grad.data() + o.bq);
        k::gemm_tn(S, H, H, L.mod1.data(), dk.data(), grad.data() + o.wk, true);
        col_sum_accum(dk.data(), S, H, grad.data() + o.bk);
        k::gemm_tn(S, H, H, L.mod1.data(), dv.data(), grad.data() + o.wv, true);
        col_sum_accum(dv.data(), S, H, grad.data() + o.bv);
        k::gemm_nt(S, H, H, dq.data(), params_.data() + o.wq, dmod.data());
        k::gemm_nt(S, H, H, dk.data(), params_.data() + o.wk, dmod.data(), true);
        k::gemm_nt(S, H, H, dv.data(), params_.data() + o.wv, dmod.data(), true);

        for (int s = 0; s < S; ++s) {
            const size_t r = static_cast<size_t>(s) * H;
            for (int j = 0; j < H; ++j) {
                dscale_a[j] += dmod[r + j] * L.ln1_xhat[r + j];
                dshift_a[j] += dmod[r + j];
                dbranch[r + j] = dmod[r + j] * (1.0 + scale_a[j]);
            }
        }
        ln_backward_accum(dbranch.data(), L.ln1_xhat.data(), L.ln1_rstd.data(), S, H, dx.data());

        // Modulation MLP.
        k::gemm_tn(1, 6 * H, H, L.cond_act.data(), dmods.data(), grad.data() + o.cond_w2, true);
        for (int j = 0; j < 6 * H; ++j) {
            grad[o.cond_b2 + j] += dmods[j];
        }
        k::gemm_nt(1, H, 6 * H, dmods.data(), params_.data() + o.cond_w2, dcond_act.data());
        for (int j = 0; j < H; ++j) {
            dcond_pre[j] = dcond_act[j] * silu_prime(L.cond_pre[j]);
        }
        k::gemm_tn(1, H, Dt, c.temb.data(), dcond_pre.data(), grad.data() + o.cond_w1, true);
        for (int j = 0; j < H; ++j) {
            grad[o.cond_b1 + j] += dcond_pre[j];
        }
    }

    // Embeddings.
    for (int s = 0; s < S; ++s) {
        double* te = grad.data() + off_tok_embed_ + static_cast<size_t>(c.tokens[s]) * H;
        double* pe = grad.data() + off_pos_embed_ + static_cast<size_t>(s) * H;
        const double* dxr = dx.data() + static_cast<size_t>(s) * H;
        for (int j = 0; j < H; ++j) {
            te[j] += dxr[j];
            pe[j] += dxr[j];
        }
    }
}

}  // namespace mdlab
