#include "pkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pkit/jsonl.hpp"
#include "pkit/parallel.hpp"

namespace pkit {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

// y[L x dout] = x[L x din] * w[din x dout] + b
void linear(const double* x, const double* w, const double* b, double* y, int rows, int din,
            int dout) {
    for (int i = 0; i < rows; ++i) {
        double* yi = y + static_cast<std::size_t>(i) * dout;
        if (b) std::memcpy(yi, b, sizeof(double) * static_cast<std::size_t>(dout));
        else std::memset(yi, 0, sizeof(double) * static_cast<std::size_t>(dout));
        const double* xi = x + static_cast<std::size_t>(i) * din;
        for (int c = 0; c < din; ++c) {
            const double xv = xi[c];
            if (xv == 0.0) continue;
            const double* wc = w + static_cast<std::size_t>(c) * dout;
            for (int o = 0; o < dout; ++o) yi[o] += xv * wc[o];
        }
    }
}

// Accumulates dx, dw, db for y = x*w + b.
void linear_backward(const double* x, const double* w, const double* dy, double* dx, double* dw,
                     double* db, int rows, int din, int dout) {
    for (int i = 0; i < rows; ++i) {
        const double* dyi = dy + static_cast<std::size_t>(i) * dout;
        const double* xi = x + static_cast<std::size_t>(i) * din;
        double* dxi = dx ? dx + static_cast<std::size_t>(i) * din : nullptr;
        for (int c = 0; c < din; ++c) {
            const double* wc = w + static_cast<std::size_t>(c) * dout;
            double* dwc = dw + static_cast<std::size_t>(c) * dout;
            const double xv = xi[c];
            double acc = 0.0;
            for (int o = 0; o < dout; ++o) {
                acc += dyi[o] * wc[o];
                dwc[o] += xv * dyi[o];
            }
            if (dxi) dxi[c] += acc;
        }
        if (db)
            for (int o = 0; o < dout; ++o) db[o] += dyi[o];
    }
}

// Per-row layer norm; stores xhat and rstd for the backward pass.
void layer_norm(const double* x, const double* g, const double* b, double* y, double* xhat,
                double* rstd, int rows, int d) {
    for (int i = 0; i < rows; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * d;
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += xi[c];
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) {
            const double t = xi[c] - mean;
            var += t * t;
        }
        var /= d;
        const double r = 1.0 / std::sqrt(var + kLnEps);
        rstd[i] = r;
        double* xh = xhat + static_cast<std::size_t>(i) * d;
        double* yi = y + static_cast<std::size_t>(i) * d;
        for (int c = 0; c < d; ++c) {
            xh[c] = (xi[c] - mean) * r;
            yi[c] = xh[c] * g[c] + b[c];
        }
    }
}

void layer_norm_backward(const double* dy, const double* xhat, const double* rstd,
                         const double* g, double* dx, double* dg, double* db, int rows, int d) {
    for (int i = 0; i < rows; ++i) {
        const double* dyi = dy + static_cast<std::size_t>(i) * d;
        const double* xh = xhat + static_cast<std::size_t>(i) * d;
        double* dxi = dx + static_cast<std::size_t>(i) * d;
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < d; ++c) {
            const double dxhat = dyi[c] * g[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xh[c];
            dg[c] += dyi[c] * xh[c];
            db[c] += dyi[c];
        }
        const double inv_d = 1.0 / d;
        for (int c = 0; c < d; ++c) {
            const double dxhat = dyi[c] * g[c];
            dxi[c] += rstd[i] * (dxhat - inv_d * sum_dxhat - xh[c] * inv_d * sum_dxhat_xhat);
        }
    }
}

struct LayerCache {
    std::vector<double> ln1_xhat, ln1_rstd, a;
    std::vector<double> q, k, v;
    std::vector<double> att;  // heads x L x L
    std::vector<double> ctx;
    std::vector<double> ln2_xhat, ln2_rstd, b;
    std::vector<double> f1, g;
};

struct Workspace {
    int L = 0;
    std::vector<double> x0;
    std::vector<std::vector<double>> x_in;   // input to each layer (x_in[0] == x0)
    std::vector<std::vector<double>> x_mid;  // after attention residual
    std::vector<LayerCache> layers;
    std::vector<double> lnf_xhat, lnf_rstd, hf;
    std::vector<std::uint8_t> mask;
};

void check_channels(const ModelConfig& cfg, const EncodedExample& e) {
    const std::size_t n = e.tokens.size();
    if (n == 0 || e.positions.size() != n || e.turns.size() != n || e.types.size() != n)
        throw DataError("model input: channel lengths disagree (encoder bug)");
    if (e.source_len < 1 || e.target_len < 0 ||
        static_cast<std::size_t>(e.source_len + e.target_len) != n)
        throw DataError("model input: segment lengths disagree (encoder bug)");
    for (std::size_t i = 0; i < n; ++i) {
        if (e.tokens[i] < 0 || e.tokens[i] >= cfg.vocab_size ||
            e.positions[i] < 0 || e.positions[i] >= cfg.max_position ||
            e.turns[i] < 0 || e.turns[i] >= cfg.max_turn ||
            e.types[i] < 0 || e.types[i] >= cfg.max_type)
            throw DataError("model input: channel value out of embedding range (encoder bug)");
    }
}

void run_trunk(const ModelParams& m, const EncodedExample& e, Workspace& ws) {
    const ModelConfig& cfg = m.cfg;
    check_channels(cfg, e);

    const int L = static_cast<int>(e.tokens.size());
    const int d = cfg.model_dim;
    const int h = cfg.heads;
    const int dh = d / h;
    const int F = cfg.ff_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t Ld = static_cast<std::size_t>(L) * d;

    ws.L = L;
    ws.mask = build_unilm_mask(static_cast<std::size_t>(e.source_len),
                               static_cast<std::size_t>(e.target_len));
    ws.x0.assign(Ld, 0.0);
    for (int i = 0; i < L; ++i) {
        double* xi = ws.x0.data() + static_cast<std::size_t>(i) * d;
        const double* te = m.p.tok_emb.data() + static_cast<std::size_t>(e.tokens[size_t(i)]) * d;
        const double* pe =
            m.p.pos_emb.data() + static_cast<std::size_t>(e.positions[size_t(i)]) * d;
        const double* ue = m.p.turn_emb.data() + static_cast<std::size_t>(e.turns[size_t(i)]) * d;
        const double* ye = m.p.type_emb.data() + static_cast<std::size_t>(e.types[size_t(i)]) * d;
        for (int c = 0; c < d; ++c) xi[c] = te[c] + pe[c] + ue[c] + ye[c];
    }

    ws.x_in.assign(static_cast<std::size_t>(cfg.layers) + 1, {});
    ws.x_mid.assign(static_cast<std::size_t>(cfg.layers), {});
    ws.layers.assign(static_cast<std::size_t>(cfg.layers), {});
    ws.x_in[0] = ws.x0;

    for (int l = 0; l < cfg.layers; ++l) {
        LayerCache& lc = ws.layers[static_cast<std::size_t>(l)];
        const LayerWeights& w = m.p.layer[static_cast<std::size_t>(l)];
        const std::vector<double>& x = ws.x_in[static_cast<std::size_t>(l)];

        lc.a.assign(Ld, 0.0);
        lc.ln1_xhat.assign(Ld, 0.0);
        lc.ln1_rstd.assign(static_cast<std::size_t>(L), 0.0);
        layer_norm(x.data(), w.ln1_g.data(), w.ln1_b.data(), lc.a.data(), lc.ln1_xhat.data(),
                   lc.ln1_rstd.data(), L, d);

        lc.q.assign(Ld, 0.0);
        lc.k.assign(Ld, 0.0);
        lc.v.assign(Ld, 0.0);
        linear(lc.a.data(), w.wq.data(), w.bq.data(), lc.q.data(), L, d, d);
        linear(lc.a.data(), w.wk.data(), w.bk.data(), lc.k.data(), L, d, d);
        linear(lc.a.data(), w.wv.data(), w.bv.data(), lc.v.data(), L, d, d);

        lc.att.assign(static_cast<std::size_t>(h) * L * L, 0.0);
        lc.ctx.assign(Ld, 0.0);
        std::vector<double> scores(static_cast<std::size_t>(L));
        for (int hd = 0; hd < h; ++hd) {
            const int off = hd * dh;
            double* att_h = lc.att.data() + static_cast<std::size_t>(hd) * L * L;
            for (int i = 0; i < L; ++i) {
                const std::uint8_t* allow = ws.mask.data() + static_cast<std::size_t>(i) * L;
                const double* qi = lc.q.data() + static_cast<std::size_t>(i) * d + off;
                double mx = -1e300;
                for (int j = 0; j < L; ++j) {
                    if (!allow[j]) continue;
                    const double* kj = lc.k.data() + static_cast<std::size_t>(j) * d + off;
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    s *= scale;
                    scores[static_cast<std::size_t>(j)] = s;
                    if (s > mx) mx = s;
                }
                double z = 0.0;
                double* arow = att_h + static_cast<std::size_t>(i) * L;
                for (int j = 0; j < L; ++j) {
                    if (!allow[j]) continue;
                    const double ev = std::exp(scores[static_cast<std::size_t>(j)] - mx);
                    arow[j] = ev;
                    z += ev;
                }
                const double inv_z = 1.0 / z;
                double* ci = lc.ctx.data() + static_cast<std::size_t>(i) * d + off;
                for (int j = 0; j < L; ++j) {
                    if (!allow[j]) continue;
                    arow[j] *= inv_z;
                    const double aij = arow[j];
                    const double* vj = lc.v.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dh; ++c) ci[c] += aij * vj[c];
                }
            }
        }

        std::vector<double>& xm = ws.x_mid[static_cast<std::size_t>(l)];
        xm.assign(Ld, 0.0);
        linear(lc.ctx.data(), w.wo.data(), w.bo.data(), xm.data(), L, d, d);
        for (std::size_t i = 0; i < Ld; ++i) xm[i] += x[i];

        lc.b.assign(Ld, 0.0);
        lc.ln2_xhat.assign(Ld, 0.0);
        lc.ln2_rstd.assign(static_cast<std::size_t>(L), 0.0);
        layer_norm(xm.data(), w.ln2_g.data(), w.ln2_b.data(), lc.b.data(), lc.ln2_xhat.data(),
                   lc.ln2_rstd.data(), L, d);

        lc.f1.assign(static_cast<std::size_t>(L) * F, 0.0);
        linear(lc.b.data(), w.w1.data(), w.b1.data(), lc.f1.data(), L, d, F);
        lc.g.resize(static_cast<std::size_t>(L) * F);
        for (std::size_t i = 0; i < lc.g.size(); ++i) lc.g[i] = gelu(lc.f1[i]);

        std::vector<double>& xn = ws.x_in[static_cast<std::size_t>(l) + 1];
        xn.assign(Ld, 0.0);
        linear(lc.g.data(), w.w2.data(), w.b2.data(), xn.data(), L, F, d);
        for (std::size_t i = 0; i < Ld; ++i) xn[i] += xm[i];
    }

    ws.hf.assign(Ld, 0.0);
    ws.lnf_xhat.assign(Ld, 0.0);
    ws.lnf_rstd.assign(static_cast<std::size_t>(L), 0.0);
    layer_norm(ws.x_in[static_cast<std::size_t>(cfg.layers)].data(), m.p.lnf_g.data(),
               m.p.lnf_b.data(), ws.hf.data(), ws.lnf_xhat.data(), ws.lnf_rstd.data(), L, d);
}

void row_logits(const ModelParams& m, const Workspace& ws, int row, std::vector<double>& out) {
    const int d = m.cfg.model_dim;
    const int V = m.cfg.vocab_size;
    out.assign(static_cast<std::size_t>(V), 0.0);
    linear(ws.hf.data() + static_cast<std::size_t>(row) * d, m.p.out_w.data(), m.p.out_b.data(),
           out.data(), 1, d, V);
}

void softmax_inplace(std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double z = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        z += x;
    }
    const double inv = 1.0 / z;
    for (double& x : v) x *= inv;
}

double log_sum_exp(const std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double z = 0.0;
    for (double x : v) z += std::exp(x - mx);
    return mx + std::log(z);
}

// Gradient of the sum of this example's per-token NLLs. Returns (sum, tokens).
std::pair<double, std::uint64_t> example_backward(const ModelParams& m, const EncodedExample& e,
                                                  ParamSet& grads) {
    const ModelConfig& cfg = m.cfg;
    if (e.target_len < 1) throw DataError("model input: example has no target tokens");

    Workspace ws;
    run_trunk(m, e, ws);

    const int L = ws.L;
    const int d = cfg.model_dim;
    const int h = cfg.heads;
    const int dh = d / h;
    const int F = cfg.ff_dim;
    const int V = cfg.vocab_size;
    const int S = e.source_len;
    const int T = e.target_len;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t Ld = static_cast<std::size_t>(L) * d;

    double loss_sum = 0.0;

    // Output head: rows S-1 .. S+T-2 predict tokens S .. S+T-1.
    std::vector<double> dhf(Ld, 0.0);
    std::vector<double> logits;
    for (int t = 0; t < T; ++t) {
        const int row = S - 1 + t;
        const int label = e.tokens[static_cast<std::size_t>(S + t)];
        row_logits(m, ws, row, logits);
        const double lse = log_sum_exp(logits);
        loss_sum += lse - logits[static_cast<std::size_t>(label)];

        // dlogits = softmax(logits) - onehot(label)
        softmax_inplace(logits);
        logits[static_cast<std::size_t>(label)] -= 1.0;
        const double* hrow = ws.hf.data() + static_cast<std::size_t>(row) * d;
        double* dhrow = dhf.data() + static_cast<std::size_t>(row) * d;
        for (int c = 0; c < d; ++c) {
            const double* wc = m.p.out_w.data() + static_cast<std::size_t>(c) * V;
            double* dwc = grads.out_w.data() + static_cast<std::size_t>(c) * V;
            const double hv = hrow[c];
            double acc = 0.0;
            for (int o = 0; o < V; ++o) {
                acc += logits[static_cast<std::size_t>(o)] * wc[o];
                dwc[o] += hv * logits[static_cast<std::size_t>(o)];
            }
            dhrow[c] += acc;
        }
        for (int o = 0; o < V; ++o) grads.out_b[static_cast<std::size_t>(o)] += logits[static_cast<std::size_t>(o)];
    }

    // Final layer norm.
    std::vector<double> dx(Ld, 0.0);
    layer_norm_backward(dhf.data(), ws.lnf_xhat.data(), ws.lnf_rstd.data(), m.p.lnf_g.data(),
                        dx.data(), grads.lnf_g.data(), grads.lnf_b.data(), L, d);

    std::vector<double> d_mid(Ld), d_branch, dctx, dq, dk, dv, da, dscores;
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerWeights& w = m.p.layer[static_cast<std::size_t>(l)];
        LayerWeights& gw = grads.layer[static_cast<std::size_t>(l)];
        const LayerCache& lc = ws.layers[static_cast<std::size_t>(l)];

        // Feed-forward residual: x_next = x_mid + g W2 + b2, g = gelu(b W1 + b1).
        d_branch.assign(static_cast<std::size_t>(L) * F, 0.0);
        linear_backward(lc.g.data(), w.w2.data(), dx.data(), d_branch.data(), gw.w2.data(),
                        gw.b2.data(), L, F, d);
        for (std::size_t i = 0; i < d_branch.size(); ++i) d_branch[i] *= gelu_grad(lc.f1[i]);
        std::vector<double> db_ln2(Ld, 0.0);
        linear_backward(lc.b.data(), w.w1.data(), d_branch.data(), db_ln2.data(), gw.w1.data(),
                        gw.b1.data(), L, d, F);
        d_mid = dx;  // residual passthrough
        layer_norm_backward(db_ln2.data(), lc.ln2_xhat.data(), lc.ln2_rstd.data(), w.ln2_g.data(),
                            d_mid.data(), gw.ln2_g.data(), gw.ln2_b.data(), L, d);

        // Attention residual: x_mid = x + ctx Wo + bo.
        dctx.assign(Ld, 0.0);
        linear_backward(lc.ctx.data(), w.wo.data(), d_mid.data(), dctx.data(), gw.wo.data(),
                        gw.bo.data(), L, d, d);

        dq.assign(Ld, 0.0);
        dk.assign(Ld, 0.0);
        dv.assign(Ld, 0.0);
        dscores.assign(static_cast<std::size_t>(L), 0.0);
        for (int hd = 0; hd < h; ++hd) {
            const int off = hd * dh;
            const double* att_h = lc.att.data() + static_cast<std::size_t>(hd) * L * L;
            for (int i = 0; i < L; ++i) {
                const std::uint8_t* allow = ws.mask.data() + static_cast<std::size_t>(i) * L;
                const double* arow = att_h + static_cast<std::size_t>(i) * L;
                const double* dci = dctx.data() + static_cast<std::size_t>(i) * d + off;

                // datt and the softmax Jacobian in one sweep.
                double dot = 0.0;
                for (int j = 0; j < L; ++j) {
                    if (!allow[j]) continue;
                    const double* vj = lc.v.data() + static_cast<std::size_t>(j) * d + off;
                    double* dvj = dv.data() + static_cast<std::size_t>(j) * d + off;
                    double da_ij = 0.0;
                    const double aij = arow[j];
                    for (int c = 0; c < dh; ++c) {
                        da_ij += dci[c] * vj[c];
                        dvj[c] += aij * dci[c];
                    }
                    dscores[static_cast<std::size_t>(j)] = da_ij;
                    dot += da_ij * aij;
                }
                const double* qi = lc.q.data() + static_cast<std::size_t>(i) * d + off;
                double* dqi = dq.data() + static_cast<std::size_t>(i) * d + off;
                for (int j = 0; j < L; ++j) {
                    if (!allow[j]) continue;
                    const double ds = arow[j] * (dscores[static_cast<std::size_t>(j)] - dot) * scale;
                    if (ds == 0.0) continue;
                    const double* kj = lc.k.data() + static_cast<std::size_t>(j) * d + off;
                    double* dkj = dk.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dh; ++c) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                    }
                }
            }
        }

        da.assign(Ld, 0.0);
        linear_backward(lc.a.data(), w.wq.data(), dq.data(), da.data(), gw.wq.data(), gw.bq.data(),
                        L, d, d);
        linear_backward(lc.a.data(), w.wk.data(), dk.data(), da.data(), gw.wk.data(), gw.bk.data(),
                        L, d, d);
        linear_backward(lc.a.data(), w.wv.data(), dv.data(), da.data(), gw.wv.data(), gw.bv.data(),
                        L, d, d);

        dx = d_mid;  // residual passthrough into x
        layer_norm_backward(da.data(), lc.ln1_xhat.data(), lc.ln1_rstd.data(), w.ln1_g.data(),
                            dx.data(), gw.ln1_g.data(), gw.ln1_b.data(), L, d);
    }

    // Embedding scatter.
    for (int i = 0; i < L; ++i) {
        const double* dxi = dx.data() + static_cast<std::size_t>(i) * d;
        double* gt = grads.tok_emb.data() + static_cast<std::size_t>(e.tokens[size_t(i)]) * d;
        double* gp = grads.pos_emb.data() + static_cast<std::size_t>(e.positions[size_t(i)]) * d;
        double* gu = grads.turn_emb.data() + static_cast<std::size_t>(e.turns[size_t(i)]) * d;
        double* gy = grads.type_emb.data() + static_cast<std::size_t>(e.types[size_t(i)]) * d;
        for (int c = 0; c < d; ++c) {
            gt[c] += dxi[c];
            gp[c] += dxi[c];
            gu[c] += dxi[c];
            gy[c] += dxi[c];
        }
    }

    return {loss_sum, static_cast<std::uint64_t>(T)};
}

std::pair<double, std::uint64_t> example_loss(const ModelParams& m, const EncodedExample& e) {
    if (e.target_len < 1) throw DataError("model input: example has no target tokens");
    Workspace ws;
    run_trunk(m, e, ws);
    const int S = e.source_len;
    const int T = e.target_len;
    std::vector<double> logits;
    double sum = 0.0;
    for (int t = 0; t < T; ++t) {
        row_logits(m, ws, S - 1 + t, logits);
        sum += log_sum_exp(logits) -
               logits[static_cast<std::size_t>(e.tokens[static_cast<std::size_t>(S + t)])];
    }
    return {sum, static_cast<std::uint64_t>(T)};
}

}  // namespace

void ModelConfig::validate() const {
    if (layers < 1 || heads < 1 || model_dim < 1 || ff_dim < 1)
        throw ConfigError("model: all dimensions must be >= 1");
    if (model_dim % heads != 0) throw ConfigError("model: model_dim must divide by heads");
    if (vocab_size < Tokenizer::kNumSpecials)
        throw ConfigError("model: vocab_size smaller than the reserved specials");
    if (max_position < 2 || max_turn < 2 || max_type < 3)
        throw ConfigError("model: embedding table ranges too small");
}

json ModelConfig::to_json() const {
    return json{{"layers", layers},       {"heads", heads},
                {"model_dim", model_dim}, {"ff_dim", ff_dim},
                {"vocab_size", vocab_size}, {"max_position", max_position},
                {"max_turn", max_turn},   {"max_type", max_type},
                {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_position = j.at("max_position").get<int>();
    c.max_turn = j.at("max_turn").get<int>();
    c.max_type = j.at("max_type").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

void ParamSet::allocate(const ModelConfig& cfg) {
    const auto d = static_cast<std::size_t>(cfg.model_dim);
    const auto F = static_cast<std::size_t>(cfg.ff_dim);
    const auto V = static_cast<std::size_t>(cfg.vocab_size);
    tok_emb.assign(V * d, 0.0);
    pos_emb.assign(static_cast<std::size_t>(cfg.max_position) * d, 0.0);
    turn_emb.assign(static_cast<std::size_t>(cfg.max_turn) * d, 0.0);
    type_emb.assign(static_cast<std::size_t>(cfg.max_type) * d, 0.0);
    layer.assign(static_cast<std::size_t>(cfg.layers), {});
    for (auto& w : layer) {
        w.ln1_g.assign(d, 0.0);
        w.ln1_b.assign(d, 0.0);
        w.wq.assign(d * d, 0.0);
        w.bq.assign(d, 0.0);
        w.wk.assign(d * d, 0.0);
        w.bk.assign(d, 0.0);
        w.wv.assign(d * d, 0.0);
        w.bv.assign(d, 0.0);
        w.wo.assign(d * d, 0.0);
        w.bo.assign(d, 0.0);
        w.ln2_g.assign(d, 0.0);
        w.ln2_b.assign(d, 0.0);
        w.w1.assign(d * F, 0.0);
        w.b1.assign(F, 0.0);
        w.w2.assign(F * d, 0.0);
        w.b2.assign(d, 0.0);
    }
    lnf_g.assign(d, 0.0);
    lnf_b.assign(d, 0.0);
    out_w.assign(d * V, 0.0);
    out_b.assign(V, 0.0);
}

void ParamSet::zero() {
    visit([](const std::string&, std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); });
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
    std::vector<const std::vector<double>*> theirs;
    other.visit([&](const std::string&, const std::vector<double>& v) { theirs.push_back(&v); });
    std::size_t k = 0;
    visit([&](const std::string&, std::vector<double>& v) {
        const auto& o = *theirs[k++];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * o[i];
    });
}

ModelParams ModelParams::init(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams m;
    m.cfg = cfg;
    m.p.allocate(cfg);
    Rng rng = Rng::derive(cfg.seed, 0x696e6974);  // init stream
    m.p.visit([&](const std::string& name, std::vector<double>& v) {
        const bool is_gain = name.ends_with("ln1_g") || name.ends_with("ln2_g") || name == "lnf_g";
        const bool is_bias = name.ends_with("_b") || name[name.size() - 2] == 'b' ||
                             name.ends_with(".bq") || name.ends_with(".bk") ||
                             name.ends_with(".bv") || name.ends_with(".bo") ||
                             name.ends_with(".b1") || name.ends_with(".b2");
        if (is_gain) {
            std::fill(v.begin(), v.end(), 1.0);
        } else if (is_bias) {
            std::fill(v.begin(), v.end(), 0.0);
        } else {
            for (double& x : v) x = 0.02 * rng.normal();
        }
    });
    return m;
}

std::vector<std::vector<double>> forward(const ModelParams& m, const EncodedExample& e) {
    if (e.target_len < 1) throw DataError("model input: example has no target tokens");
    Workspace ws;
    run_trunk(m, e, ws);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(e.target_len));
    for (int t = 0; t < e.target_len; ++t) {
        row_logits(m, ws, e.source_len - 1 + t, rows[static_cast<std::size_t>(t)]);
        softmax_inplace(rows[static_cast<std::size_t>(t)]);
    }
    return rows;
}

std::vector<double> next_token_distribution(const ModelParams& m, const EncodedExample& e) {
    Workspace ws;
    run_trunk(m, e, ws);
    std::vector<double> row;
    row_logits(m, ws, ws.L - 1, row);
    softmax_inplace(row);
    return row;
}

double nll_loss(const ModelParams& m, const std::vector<EncodedExample>& batch) {
    if (batch.empty()) throw DataError("nll_loss: empty batch");
    double sum = 0.0;
    std::uint64_t tokens = 0;
    for (const auto& e : batch) {
        auto [s, t] = example_loss(m, e);
        sum += s;
        tokens += t;
    }
    if (tokens == 0) throw DataError("nll_loss: batch has no target tokens");
    return sum / static_cast<double>(tokens);
}

namespace {

// Per-example gradient buffers reduced in example order; bit-identical for any
// thread count and to the serial reference.
BatchGrad batch_gradients_impl(const ModelParams& m, const std::vector<EncodedExample>& batch,
                               int threads) {
    if (batch.empty()) throw DataError("batch_gradients: empty batch");
    BatchGrad out;
    out.grads.allocate(m.cfg);

    // Wave size only controls scratch memory; gradients reduce in example
    // order regardless, so any wave gives identical bits. 64 MiB of gradient
    // buffers covers a whole batch at toy scale; huge configs fall back to
    // a few buffers per worker.
    std::size_t params_per_set = 0;
    out.grads.visit([&](const std::string&, std::vector<double>& v) { params_per_set += v.size(); });
    const int workers = threads > 0 ? threads : omp_get_max_threads();
    const std::size_t budget_sets = (64ull << 20) / std::max<std::size_t>(params_per_set * 8, 1);
    const std::size_t wave = std::min(
        batch.size(),
        std::max<std::size_t>(static_cast<std::size_t>(2 * workers), std::max<std::size_t>(budget_sets, 1)));
    std::vector<ParamSet> bufs(wave);
    for (auto& b : bufs) b.allocate(m.cfg);
    std::vector<double> sums(wave);
    std::vector<std::uint64_t> counts(wave);

    double loss_sum = 0.0;
    for (std::size_t base = 0; base < batch.size(); base += wave) {
        const std::size_t n = std::min(wave, batch.size() - base);
        parallel_for(n, threads, [&](std::size_t k) {
            bufs[k].zero();
            auto [s, t] = example_backward(m, batch[base + k], bufs[k]);
            sums[k] = s;
            counts[k] = t;
        });
        for (std::size_t k = 0; k < n; ++k) {
            out.grads.add_scaled(bufs[k], 1.0);
            loss_sum += sums[k];
            out.target_tokens += counts[k];
        }
    }
    if (out.target_tokens == 0) throw DataError("batch_gradients: batch has no target tokens");

    const double inv = 1.0 / static_cast<double>(out.target_tokens);
    out.grads.visit([&](const std::string&, std::vector<double>& v) {
        for (double& x : v) x *= inv;
    });
    out.loss = loss_sum * inv;
    return out;
}

}  // namespace

BatchGrad batch_gradients_serial(const ModelParams& m, const std::vector<EncodedExample>& batch) {
    return batch_gradients_impl(m, batch, 1);
}

BatchGrad batch_gradients_parallel(const ModelParams& m, const std::vector<EncodedExample>& batch,
                                   int threads) {
    return batch_gradients_impl(m, batch, threads);
}

void TrainSchedule::validate() const {
    if (peak_lr <= 0.0) throw ConfigError("schedule: peak_lr must be > 0");
    if (warmup_steps < 0 || total_steps < 1 || warmup_steps > total_steps)
        throw ConfigError("schedule: need 0 <= warmup_steps <= total_steps");
    if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
}

double TrainSchedule::lr_at(int step) const {
    if (warmup_steps > 0 && step <= warmup_steps)
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (total_steps == warmup_steps) return peak_lr;
    const double t = static_cast<double>(step - warmup_steps) /
                     static_cast<double>(total_steps - warmup_steps);
    const double pi = 3.14159265358979323846;
    return peak_lr * 0.5 * (1.0 + std::cos(pi * t));
}

std::vector<StepRecord> train(ModelParams& m, const std::vector<EncodedExample>& dataset,
                              const TrainSchedule& schedule, const AdamConfig& adam, int threads,
                              const std::function<void(const StepRecord&)>& on_step) {
    schedule.validate();
    if (dataset.empty()) throw DataError("train: empty dataset");

    ParamSet mom1, mom2;
    mom1.allocate(m.cfg);
    mom2.allocate(m.cfg);

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces a shuffle on first use
    std::uint64_t epoch = 0;

    std::vector<StepRecord> trace;
    trace.reserve(static_cast<std::size_t>(schedule.total_steps));

    std::vector<EncodedExample> batch;
    for (int step = 1; step <= schedule.total_steps; ++step) {
        batch.clear();
        while (batch.size() < static_cast<std::size_t>(schedule.batch_size)) {
            if (cursor == order.size()) {
                Rng rng = Rng::derive(m.cfg.seed, 0x65706f63 + epoch);
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[rng.bounded(i)]);
                cursor = 0;
                ++epoch;
            }
            batch.push_back(dataset[order[cursor++]]);
        }

        BatchGrad bg = batch_gradients_impl(m, batch, threads);
        if (!std::isfinite(bg.loss))
            throw DataError("train: loss diverged at step " + std::to_string(step));

        const double lr = schedule.lr_at(step);
        const double bc1 = 1.0 - std::pow(adam.beta1, step);
        const double bc2 = 1.0 - std::pow(adam.beta2, step);

        std::vector<std::vector<double>*> gs, m1s, m2s;
        bg.grads.visit([&](const std::string&, std::vector<double>& v) { gs.push_back(&v); });
        mom1.visit([&](const std::string&, std::vector<double>& v) { m1s.push_back(&v); });
        mom2.visit([&](const std::string&, std::vector<double>& v) { m2s.push_back(&v); });
        std::size_t bi = 0;
        m.p.visit([&](const std::string&, std::vector<double>& p) {
            std::vector<double>& g = *gs[bi];
            std::vector<double>& m1 = *m1s[bi];
            std::vector<double>& m2 = *m2s[bi];
            ++bi;
            for (std::size_t i = 0; i < p.size(); ++i) {
                m1[i] = adam.beta1 * m1[i] + (1.0 - adam.beta1) * g[i];
                m2[i] = adam.beta2 * m2[i] + (1.0 - adam.beta2) * g[i] * g[i];
                const double mhat = m1[i] / bc1;
                const double vhat = m2[i] / bc2;
                p[i] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
            }
        });

        StepRecord rec{step, lr, bg.loss};
        trace.push_back(rec);
        if (on_step) on_step(rec);
    }
    return trace;
}

double perplexity(const ModelParams& m, const std::vector<EncodedExample>& dataset, int threads) {
    if (dataset.empty()) throw DataError("perplexity: empty dataset");
    std::vector<double> sums(dataset.size());
    std::vector<std::uint64_t> counts(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        auto [s, t] = example_loss(m, dataset[i]);
        sums[i] = s;
        counts[i] = t;
    });
    double sum = 0.0;
    std::uint64_t tokens = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        sum += sums[i];
        tokens += counts[i];
    }
    if (tokens == 0) throw DataError("perplexity: no target tokens");
    return std::exp(sum / static_cast<double>(tokens));
}

EncodedExample assemble_source(const TrainingExample& x, const Tokenizer& tok,
                               const EncoderConfig& cfg) {
    TrainingExample stub = x;
    stub.response.text = "stub";  // single in-or-out-of-vocab token; stripped below
    auto enc = assemble_sequence(stub, tok, cfg);
    EncodedExample e = std::move(*enc);
    e.tokens.resize(static_cast<std::size_t>(e.source_len));
    e.positions.resize(static_cast<std::size_t>(e.source_len));
    e.turns.resize(static_cast<std::size_t>(e.source_len));
    e.types.resize(static_cast<std::size_t>(e.source_len));
    e.target_len = 0;
    return e;
}

std::vector<int> generate(const ModelParams& m, const EncodedExample& source,
                          const GenerateConfig& cfg) {
    EncodedExample e = source;
    e.tokens.resize(static_cast<std::size_t>(e.source_len));
    e.positions.resize(static_cast<std::size_t>(e.source_len));
    e.turns.resize(static_cast<std::size_t>(e.source_len));
    e.types.resize(static_cast<std::size_t>(e.source_len));
    e.target_len = 0;

    Rng rng = Rng::derive(cfg.seed, 0x67656e);  // decode stream
    std::vector<int> out;
    while (static_cast<int>(out.size()) < cfg.max_len) {
        std::vector<double> dist = next_token_distribution(m, e);
        int chosen;
        if (cfg.decoding == Decoding::greedy) {
            chosen = 0;
            for (std::size_t v = 1; v < dist.size(); ++v)
                if (dist[v] > dist[static_cast<std::size_t>(chosen)]) chosen = static_cast<int>(v);
        } else {
            const int k = std::max(1, std::min<int>(cfg.top_k, static_cast<int>(dist.size())));
            std::vector<int> idx(dist.size());
            for (std::size_t v = 0; v < idx.size(); ++v) idx[v] = static_cast<int>(v);
            std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
                if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
                    return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
                return a < b;
            });
            double z = 0.0;
            for (int i = 0; i < k; ++i) z += dist[static_cast<std::size_t>(idx[size_t(i)])];
            double u = rng.uniform_real() * z;
            chosen = idx[static_cast<std::size_t>(k - 1)];
            for (int i = 0; i < k; ++i) {
                u -= dist[static_cast<std::size_t>(idx[size_t(i)])];
                if (u <= 0.0) {
                    chosen = idx[static_cast<std::size_t>(i)];
                    break;
                }
            }
        }
        if (chosen == Tokenizer::kEos) break;
        e.tokens.push_back(chosen);
        e.positions.push_back(e.target_len);
        e.turns.push_back(0);
        e.types.push_back(0);
        ++e.target_len;
        out.push_back(chosen);
    }
    return out;
}

void save_checkpoint(const ModelParams& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("checkpoint: cannot write " + path);
    const std::string magic = "PKITCKP1";
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    const std::string cfg = m.cfg.to_json().dump();
    const std::uint32_t clen = static_cast<std::uint32_t>(cfg.size());
    out.write(reinterpret_cast<const char*>(&clen), sizeof(clen));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    m.p.visit([&](const std::string& name, const std::vector<double>& v) {
        const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const std::uint64_t count = v.size();
        out.write(reinterpret_cast<const char*>(&count), sizeof(count));
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    });
    if (!out) throw ConfigError("checkpoint: short write to " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "PKITCKP1")
        throw DataError("checkpoint: bad magic in " + path);
    std::uint32_t clen = 0;
    in.read(reinterpret_cast<char*>(&clen), sizeof(clen));
    std::string cfg_str(clen, '\0');
    in.read(cfg_str.data(), clen);
    if (!in) throw DataError("checkpoint: truncated header in " + path);
    json cfg_json = json::parse(cfg_str, nullptr, false);
    if (cfg_json.is_discarded()) throw DataError("checkpoint: bad config in " + path);

    ModelParams m;
    m.cfg = ModelConfig::from_json(cfg_json);
    m.cfg.validate();
    m.p.allocate(m.cfg);
    m.p.visit([&](const std::string& name, std::vector<double>& v) {
        std::uint32_t nlen = 0;
        in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
        std::string got(nlen, '\0');
        in.read(got.data(), nlen);
        std::uint64_t count = 0;
        in.read(reinterpret_cast<char*>(&count), sizeof(count));
        if (!in || got != name || count != v.size())
            throw DataError("checkpoint: block mismatch at " + name + " in " + path);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw DataError("checkpoint: truncated block " + name + " in " + path);
    });
    return m;
}

}  // namespace pkit
