#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlab/rng.hpp"

namespace mdlab {

struct ModelConfig {
    int layers = 4;
    int hidden_dim = 256;
    int heads = 4;
    int ffn_dim = 1024;
    int vocab_size = 2048;
    int max_seq_len = 128;
    int timestep_dim = 128;
    bool time_conditioning = true;

    int head_dim() const { return hidden_dim / heads; }
    void validate() const;  // throws std::invalid_argument
};

// t fed to the modulation path when time conditioning is off.
inline constexpr double kFixedTimeInput = 0.5;

// Sinusoidal features of diffusion time: dim/2 geometrically spaced
// frequencies between 1000 rad and a maximum period of 1e4, sin block then
// cos block.
std::vector<double> timestep_embedding(double t, int dim);

struct ParamInfo {
    std::string name;
    int64_t offset = 0;
    int64_t size = 0;
    bool decay = false;        // participates in weight decay
    double init_stddev = 0.0;  // 0 => zero init
};

struct LayerCache {
    std::vector<double> x_in;        // [S,H] residual input to the block
    std::vector<double> ln1_xhat;    // [S,H]
    std::vector<double> ln1_rstd;    // [S]
    std::vector<double> mod1;        // [S,H] modulated attention input
    std::vector<double> q, k, v;     // [S,H]
    std::vector<double> attn_probs;  // [heads,S,S]
    std::vector<double> att_concat;  // [S,H]
    std::vector<double> attn_out;    // [S,H] after the output projection
    std::vector<double> x_mid;       // [S,H]
    std::vector<double> ln2_xhat;    // [S,H]
    std::vector<double> ln2_rstd;    // [S]
    std::vector<double> mod2;        // [S,H]
    std::vector<double> ffn_pre;     // [S,F]
    std::vector<double> ffn_act;     // [S,F]
    std::vector<double> ffn_out;     // [S,H]
    std::vector<double> cond_pre;    // [H] modulation MLP hidden, pre-activation
    std::vector<double> cond_act;    // [H]
    std::vector<double> mods;        // [6H]: shift/scale/gate (attn), shift/scale/gate (ffn)
};

struct ForwardCache {
    std::vector<int> tokens;
    int seq_len = 0;
    double t_input = 0.0;         // the t the modulation path actually saw
    std::vector<double> temb;     // [timestep_dim]
    std::vector<LayerCache> layers;
    std::vector<double> x_final;  // [S,H]
    std::vector<double> lnf_xhat; // [S,H]
    std::vector<double> lnf_rstd; // [S]
};

// Pre-norm bidirectional encoder with per-sublayer AdaLN-zero modulation
// driven by the timestep embedding, learned absolute positions, GELU FFN,
// and a weight-tied output head. All parameters live in one flat buffer.
class Model {
  public:
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    const std::vector<ParamInfo>& param_infos() const { return infos_; }
    const ParamInfo& param_info(const std::string& name) const;

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    int64_t param_count() const { return static_cast<int64_t>(params_.size()); }
    static int64_t expected_param_count(const ModelConfig& config);

    // Scaled-normal init; residual output projections shrunk by 1/sqrt(2*layers);
    // modulation output projection and all biases zero (AdaLN-zero).
    void init_parameters(Rng& rng);

    // logits: row-major [seq_len, vocab]. Pass a cache to enable backward.
    void forward(const std::vector<int>& tokens, double t, std::vector<double>& logits,
                 ForwardCache* cache = nullptr) const;

    // Accumulates parameter gradients into grad (size param_count) given
    // d(loss)/d(logits) for the cached forward pass.
    void backward(const ForwardCache& cache, const std::vector<double>& dlogits,
                  std::vector<double>& grad) const;

  private:
    void forward_impl(const std::vector<int>& tokens, double t, std::vector<double>& logits,
                      ForwardCache& c) const;
    const double* p(const std::string& name) const;
    double* g(std::vector<double>& grad, int64_t offset) const { return grad.data() + offset; }

    ModelConfig config_;
    std::vector<double> params_;
    std::vector<ParamInfo> infos_;

    // Cached offsets resolved once in the constructor.
    int64_t off_tok_embed_ = 0, off_pos_embed_ = 0, off_head_bias_ = 0;
    struct LayerOffsets {
        int64_t cond_w1, cond_b1, cond_w2, cond_b2;
        int64_t wq, bq, wk, bk, wv, bv, wo, bo;
        int64_t ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<LayerOffsets> layer_off_;
};

}  // namespace mdlab
