#include "core/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace cyclecluster::model {

namespace {

void check_finite(const Matrix& m, const std::string& where) {
    if (!m.allFinite()) throw NumericError("non-finite activations at " + where);
}

Matrix leaky_relu(const Matrix& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix leaky_relu_grad(const Matrix& upstream, const Matrix& z, double slope) {
    Matrix out(upstream.rows(), upstream.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            out(i, j) = upstream(i, j) * (z(i, j) > 0.0 ? 1.0 : slope);
        }
    }
    return out;
}

}  // namespace

ModelParams init_params(int input_dim, const std::vector<int>& hidden, int embed_dim,
                        int head_width, double leaky_slope, std::uint64_t seed) {
    if (input_dim < 1 || embed_dim < 1 || head_width < 1) {
        throw std::invalid_argument("init_params: dimensions must be >= 1");
    }
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("init_params: hidden sizes must be >= 1");
    }

    Rng rng(derive_seed(seed, 0x6d6f64656c));  // "model"
    auto glorot = [&rng](int out, int in) {
        Layer layer;
        layer.w.resize(out, in);
        layer.b = Vector::Zero(out);
        const double bound = std::sqrt(6.0 / (in + out));
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < in; ++j) layer.w(i, j) = rng.uniform(-bound, bound);
        }
        return layer;
    };

    ModelParams params;
    params.leaky_slope = leaky_slope;
    int in = input_dim;
    for (int h : hidden) {
        params.extractor.push_back(glorot(h, in));
        in = h;
    }
    params.extractor.push_back(glorot(embed_dim, in));
    params.head = glorot(head_width, embed_dim);
    return params;
}

ModelParams zero_like(const ModelParams& params) {
    ModelParams z;
    z.leaky_slope = params.leaky_slope;
    for (const auto& layer : params.extractor) {
        z.extractor.push_back({Matrix::Zero(layer.w.rows(), layer.w.cols()), Vector::Zero(layer.b.size())});
    }
    z.head = {Matrix::Zero(params.head.w.rows(), params.head.w.cols()), Vector::Zero(params.head.b.size())};
    return z;
}

namespace {

// Runs the extractor and normalization, filling the trace if given.
Matrix run_extractor(const ModelParams& params, const Matrix& batch, ForwardTrace* trace) {
    if (batch.cols() != params.input_dim()) {
        throw std::invalid_argument("batch dimension does not match model input dimension");
    }
    const int layer_count = static_cast<int>(params.extractor.size());
    Matrix a = batch;
    for (int l = 0; l < layer_count; ++l) {
        const auto& layer = params.extractor[l];
        Matrix z = (a * layer.w.transpose()).rowwise() + layer.b.transpose();
        check_finite(z, "extractor layer " + std::to_string(l));
        Matrix act = (l + 1 < layer_count) ? leaky_relu(z, params.leaky_slope) : z;
        if (trace) {
            trace->pre_acts.push_back(std::move(z));
            trace->acts.push_back(act);
        }
        a = std::move(act);
    }

    Vector norms = a.rowwise().norm();
    Matrix normalized(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (norms[i] > 0.0) {
            normalized.row(i) = a.row(i) / norms[i];
        } else {
            normalized.row(i).setZero();
        }
    }
    if (trace) {
        trace->input = batch;
        trace->norms = std::move(norms);
        trace->normalized = normalized;
    }
    return normalized;
}

}  // namespace

Matrix embed(const ModelParams& params, const Matrix& batch) {
    return run_extractor(params, batch, nullptr);
}

Matrix forward(const ModelParams& params, const Matrix& batch, int head_width, ForwardTrace* trace) {
    if (head_width < 1 || head_width > params.head_width()) {
        throw std::invalid_argument("forward: head_width out of range");
    }
    const Matrix v = run_extractor(params, batch, trace);
    // Always compute the full head so sliced scores match the full ones exactly.
    Matrix full = (v * params.head.w.transpose()).rowwise() + params.head.b.transpose();
    check_finite(full, "head layer");
    if (trace) trace->head_width = head_width;
    return full.leftCols(head_width);
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix p(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        p.row(i) = (scores.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

LossGrad cross_entropy_loss(const Matrix& scores, const std::vector<int>& targets,
                            const Vector& per_sample_weights) {
    const auto b = scores.rows();
    if (static_cast<Eigen::Index>(targets.size()) != b || per_sample_weights.size() != b) {
        throw std::invalid_argument("cross_entropy_loss: batch size mismatch");
    }
    for (int t : targets) {
        if (t < 0 || t >= scores.cols()) {
            throw std::invalid_argument("cross_entropy_loss: target class out of range");
        }
    }

    const Matrix p = softmax_rows(scores);
    LossGrad out;
    out.grad_scores = Matrix::Zero(scores.rows(), scores.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double w = per_sample_weights[i];
        total += w * -std::log(std::max(p(i, targets[i]), 1e-12));
        out.grad_scores.row(i) = (w / b) * p.row(i);
        out.grad_scores(i, targets[i]) -= w / b;
    }
    out.loss = total / b;
    return out;
}

ModelGrads backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_scores) {
    const int hw = trace.head_width;
    if (grad_scores.cols() != hw || grad_scores.rows() != trace.input.rows()) {
        throw std::invalid_argument("backward: grad_scores shape does not match trace");
    }

    ModelGrads grads = zero_like(params);
    const int full_width = params.head_width();

    Matrix g_full = Matrix::Zero(grad_scores.rows(), full_width);
    g_full.leftCols(hw) = grad_scores;
    grads.head.w = g_full.transpose() * trace.normalized;
    grads.head.b = g_full.colwise().sum();

    Matrix g = g_full * params.head.w;  // grad wrt normalized embedding

    // d/de of e/||e||: (g - (g.v)v)/||e||; zero rows have zero Jacobian.
    Matrix ge(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (trace.norms[i] > 0.0) {
            const auto v = trace.normalized.row(i);
            ge.row(i) = (g.row(i) - g.row(i).dot(v) * v) / trace.norms[i];
        } else {
            ge.row(i).setZero();
        }
    }

    const int layer_count = static_cast<int>(params.extractor.size());
    Matrix g_act = std::move(ge);
    for (int l = layer_count - 1; l >= 0; --l) {
        const Matrix gz = (l == layer_count - 1)
                              ? std::move(g_act)
                              : leaky_relu_grad(g_act, trace.pre_acts[l], params.leaky_slope);
        const Matrix& input = (l == 0) ? trace.input : trace.acts[l - 1];
        grads.extractor[l].w = gz.transpose() * input;
        grads.extractor[l].b = gz.colwise().sum();
        if (l > 0) g_act = gz * params.extractor[l].w;
    }
    return grads;
}

OptimizerState make_optimizer(const ModelParams& params, double momentum, double weight_decay,
                              double base_lr, int anneal_epochs) {
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("make_optimizer: momentum must be in [0, 1)");
    }
    OptimizerState state;
    const ModelParams z = zero_like(params);
    state.extractor_buf = z.extractor;
    state.head_buf = z.head;
    state.momentum = momentum;
    state.weight_decay = weight_decay;
    state.base_lr = base_lr;
    state.anneal_epochs = anneal_epochs;
    return state;
}

namespace {

void sgd_update(Matrix& p, const Matrix& g, Matrix& buf, double momentum, double wd, double lr) {
    buf = momentum * buf + g + wd * p;
    p -= lr * buf;
}

void sgd_update(Vector& p, const Vector& g, Vector& buf, double momentum, double wd, double lr) {
    buf = momentum * buf + g + wd * p;
    p -= lr * buf;
}

}  // namespace

void sgd_step(ModelParams& params, const ModelGrads& grads, OptimizerState& state, double lr) {
    if (lr < 0.0) throw std::invalid_argument("sgd_step: lr must be >= 0");
    for (const auto& layer : grads.extractor) {
        if (!layer.w.allFinite() || !layer.b.allFinite()) throw NumericError("non-finite gradient");
    }
    if (!grads.head.w.allFinite() || !grads.head.b.allFinite()) throw NumericError("non-finite gradient");

    for (std::size_t l = 0; l < params.extractor.size(); ++l) {
        sgd_update(params.extractor[l].w, grads.extractor[l].w, state.extractor_buf[l].w,
                   state.momentum, state.weight_decay, lr);
        sgd_update(params.extractor[l].b, grads.extractor[l].b, state.extractor_buf[l].b,
                   state.momentum, state.weight_decay, lr);
    }
    sgd_update(params.head.w, grads.head.w, state.head_buf.w, state.momentum, state.weight_decay, lr);
    sgd_update(params.head.b, grads.head.b, state.head_buf.b, state.momentum, state.weight_decay, lr);
    state.step += 1;
}

double cosine_lr(int epoch, double base_lr, int anneal_epochs) {
    if (anneal_epochs < 1) throw std::invalid_argument("cosine_lr: anneal horizon must be >= 1");
    if (epoch < 0) throw std::invalid_argument("cosine_lr: epoch must be >= 0");
    if (epoch >= anneal_epochs) return 0.0;  // cos(pi) term vanishes at and past the horizon
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / anneal_epochs));
}

namespace {

using nlohmann::json;

json layer_to_json(const Layer& layer) {
    json j;
    j["rows"] = layer.w.rows();
    j["cols"] = layer.w.cols();
    std::vector<double> w(layer.w.data(), layer.w.data() + layer.w.size());
    std::vector<double> b(layer.b.data(), layer.b.data() + layer.b.size());
    j["w"] = w;
    j["b"] = b;
    return j;
}

Layer layer_from_json(const json& j) {
    Layer layer;
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto w = j.at("w").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
        throw DataError("checkpoint: layer shape does not match its data");
    }
    layer.w = Eigen::Map<const Matrix>(w.data(), rows, cols);
    layer.b = Eigen::Map<const Vector>(b.data(), rows);
    return layer;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const OptimizerState& opt) {
    json j;
    j["format"] = "cyclecluster-checkpoint";
    j["version"] = kCheckpointVersion;
    j["leaky_slope"] = params.leaky_slope;
    j["extractor"] = json::array();
    for (const auto& layer : params.extractor) j["extractor"].push_back(layer_to_json(layer));
    j["head"] = layer_to_json(params.head);

    json o;
    o["momentum"] = opt.momentum;
    o["weight_decay"] = opt.weight_decay;
    o["base_lr"] = opt.base_lr;
    o["anneal_epochs"] = opt.anneal_epochs;
    o["step"] = opt.step;
    o["epoch"] = opt.epoch;
    o["extractor_buf"] = json::array();
    for (const auto& layer : opt.extractor_buf) o["extractor_buf"].push_back(layer_to_json(layer));
    o["head_buf"] = layer_to_json(opt.head_buf);
    j["optimizer"] = o;

    std::ofstream out(path);
    if (!out) throw DataError("checkpoint '" + path + "': cannot open for writing");
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("checkpoint '" + path + "': cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint '" + path + "': invalid JSON: " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "cyclecluster-checkpoint") {
            throw DataError("checkpoint '" + path + "': unrecognized format field");
        }
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw DataError("checkpoint '" + path + "': unsupported version");
        }
        Checkpoint cp;
        cp.params.leaky_slope = j.at("leaky_slope").get<double>();
        for (const auto& lj : j.at("extractor")) cp.params.extractor.push_back(layer_from_json(lj));
        cp.params.head = layer_from_json(j.at("head"));

        const auto& o = j.at("optimizer");
        cp.opt.momentum = o.at("momentum").get<double>();
        cp.opt.weight_decay = o.at("weight_decay").get<double>();
        cp.opt.base_lr = o.at("base_lr").get<double>();
        cp.opt.anneal_epochs = o.at("anneal_epochs").get<int>();
        cp.opt.step = o.at("step").get<std::int64_t>();
        cp.opt.epoch = o.at("epoch").get<int>();
        for (const auto& lj : o.at("extractor_buf")) cp.opt.extractor_buf.push_back(layer_from_json(lj));
        cp.opt.head_buf = layer_from_json(o.at("head_buf"));
        if (cp.params.extractor.empty()) throw DataError("checkpoint '" + path + "': no extractor layers");
        return cp;
    } catch (const json::exception& e) {
        throw DataError("checkpoint '" + path + "': missing or malformed field: " + std::string(e.what()));
    }
}

}  // namespace cyclecluster::model
