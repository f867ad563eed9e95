#include "agfv/layers.hpp"

#include <algorithm>
#include <cmath>

namespace agfv {

namespace {

void round_f32(Tensor& t, Precision precision) {
    if (precision != Precision::F32) return;
    for (double& x : t.values()) x = static_cast<double>(static_cast<float>(x));
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
    return (in - kernel) / stride + 1;
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Relu: return "relu";
        case LayerKind::Lrn: return "lrn";
        case LayerKind::FullyConnected: return "fully_connected";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::L2Norm: return "l2norm";
        case LayerKind::ConcatInject: return "concat_inject";
    }
    return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    s.window = window;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}

LayerSpec LayerSpec::lrn(double k, std::size_t n, double alpha, double beta) {
    LayerSpec s;
    s.kind = LayerKind::Lrn;
    s.lrn_k = k;
    s.lrn_n = n;
    s.lrn_alpha = alpha;
    s.lrn_beta = beta;
    return s;
}

LayerSpec LayerSpec::fully_connected(std::size_t fan_out) {
    LayerSpec s;
    s.kind = LayerKind::FullyConnected;
    s.fan_out = fan_out;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::l2norm() {
    LayerSpec s;
    s.kind = LayerKind::L2Norm;
    return s;
}

LayerSpec LayerSpec::concat_inject(std::size_t inject_width) {
    LayerSpec s;
    s.kind = LayerKind::ConcatInject;
    s.inject_width = inject_width;
    return s;
}

void LayerSpec::validate(std::size_t index) const {
    auto fail = [&](const std::string& msg) {
        throw ShapeError("layer " + std::to_string(index) + " (" + layer_kind_name(kind) +
                         "): " + msg);
    };
    switch (kind) {
        case LayerKind::Conv:
            if (out_channels == 0 || kernel == 0 || stride == 0) fail("conv hyperparameters must be positive");
            break;
        case LayerKind::MaxPool:
            if (window == 0 || stride == 0) fail("pool hyperparameters must be positive");
            break;
        case LayerKind::Lrn:
            if (lrn_k <= 0.0 || lrn_n == 0) fail("lrn requires k > 0 and positive window");
            break;
        case LayerKind::FullyConnected:
            if (fan_out == 0) fail("fan-out must be positive");
            break;
        case LayerKind::Dropout:
            if (rate < 0.0 || rate >= 1.0) fail("dropout rate must be in [0,1)");
            break;
        default:
            break;
    }
}

std::vector<std::vector<std::size_t>> NetworkConfig::shape_check() const {
    std::vector<std::vector<std::size_t>> shapes;
    std::vector<std::size_t> cur = input_shape();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        l.validate(i);
        auto fail = [&](const std::string& msg) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                             "): " + msg + ", input shape " + shape_to_string(cur));
        };
        switch (l.kind) {
            case LayerKind::Conv: {
                if (cur.size() != 3) fail("expects [C,H,W] input");
                if (cur[1] < l.kernel || cur[2] < l.kernel) fail("kernel larger than input");
                cur = {l.out_channels, conv_out_extent(cur[1], l.kernel, l.stride),
                       conv_out_extent(cur[2], l.kernel, l.stride)};
                break;
            }
            case LayerKind::MaxPool: {
                if (cur.size() != 3) fail("expects [C,H,W] input");
                if (cur[1] < l.window || cur[2] < l.window) fail("window larger than input");
                cur = {cur[0], conv_out_extent(cur[1], l.window, l.stride),
                       conv_out_extent(cur[2], l.window, l.stride)};
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Dropout:
                break;
            case LayerKind::Lrn:
                if (cur.size() != 3) fail("expects [C,H,W] input");
                break;
            case LayerKind::FullyConnected:
                cur = {l.fan_out};
                break;
            case LayerKind::L2Norm:
                if (cur.size() != 1) fail("expects rank-1 input");
                break;
            case LayerKind::ConcatInject:
                if (cur.size() != 1) fail("expects rank-1 input");
                cur = {cur[0] + l.inject_width};
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

NetworkConfig NetworkConfig::desk32(std::size_t num_classes) {
    NetworkConfig net;
    net.input_side = 32;
    net.input_channels = 1;
    net.fc6_width = 64;
    net.fc7_width = 64;
    net.fc8_classes = num_classes;
    net.layers = {
        LayerSpec::conv(8, 5, 2),  LayerSpec::relu(),          LayerSpec::lrn(),
        LayerSpec::maxpool(2, 2),  LayerSpec::conv(16, 3, 1),  LayerSpec::relu(),
        LayerSpec::lrn(),          LayerSpec::conv(16, 3, 1),  LayerSpec::relu(),
        LayerSpec::maxpool(3, 3),  LayerSpec::fully_connected(64),
        LayerSpec::relu(),         LayerSpec::dropout(0.1),
        LayerSpec::fully_connected(64),
        LayerSpec::relu(),         LayerSpec::dropout(0.1),
        LayerSpec::fully_connected(num_classes),
    };
    return net;
}

NetworkConfig NetworkConfig::desk32_embedding(std::size_t inject_width) {
    NetworkConfig net;
    net.input_side = 32;
    net.input_channels = 1;
    net.fc6_width = 64;
    net.fc7_width = 64;
    net.fc8_classes = 0;
    net.layers = {
        LayerSpec::conv(8, 5, 2),  LayerSpec::relu(),         LayerSpec::lrn(),
        LayerSpec::maxpool(2, 2),  LayerSpec::conv(16, 3, 1), LayerSpec::relu(),
        LayerSpec::lrn(),          LayerSpec::conv(16, 3, 1), LayerSpec::relu(),
        LayerSpec::maxpool(3, 3),  LayerSpec::fully_connected(64),
        LayerSpec::relu(),         LayerSpec::dropout(0.1),
    };
    if (inject_width > 0) net.layers.push_back(LayerSpec::concat_inject(inject_width));
    net.layers.push_back(LayerSpec::fully_connected(64));
    net.layers.push_back(LayerSpec::relu());
    net.layers.push_back(LayerSpec::l2norm());
    return net;
}

NetworkConfig NetworkConfig::paper200(std::size_t num_classes) {
    NetworkConfig net;
    net.input_side = 200;
    net.input_channels = 1;
    net.fc6_width = 4096;
    net.fc7_width = 4096;  // printed 4097 upstream, treated as off-by-one
    net.fc8_classes = num_classes;
    net.layers = {
        LayerSpec::conv(96, 11, 4),  LayerSpec::relu(), LayerSpec::lrn(),
        LayerSpec::maxpool(3, 2),
        LayerSpec::conv(256, 5, 1),  LayerSpec::relu(), LayerSpec::lrn(),
        LayerSpec::maxpool(3, 2),
        LayerSpec::conv(384, 3, 1),  LayerSpec::relu(),
        LayerSpec::conv(384, 3, 1),  LayerSpec::relu(),
        LayerSpec::conv(256, 3, 1),  LayerSpec::relu(),
        LayerSpec::maxpool(3, 2),
        LayerSpec::fully_connected(4096),
        LayerSpec::relu(),           LayerSpec::dropout(0.5),
        LayerSpec::fully_connected(4096),
        LayerSpec::relu(),           LayerSpec::dropout(0.5),
        LayerSpec::fully_connected(num_classes),
    };
    return net;
}

NetworkConfig NetworkConfig::paper200_embedding(std::size_t inject_width) {
    NetworkConfig net = paper200(1);
    net.fc8_classes = 0;
    // drop the classifier head (fc8 and its dropout), then fc7 and its relu
    // so the injection slot can sit between fc6's dropout and fc7
    net.layers.resize(net.layers.size() - 4);
    if (inject_width > 0) net.layers.push_back(LayerSpec::concat_inject(inject_width));
    net.layers.push_back(LayerSpec::fully_connected(net.fc7_width));
    net.layers.push_back(LayerSpec::relu());
    net.layers.push_back(LayerSpec::l2norm());
    return net;
}

bool ModelParams::all_finite() const {
    for (const ParamEntry& e : layers) {
        if (!e.weight.all_finite() || !e.bias.all_finite()) return false;
    }
    return true;
}

ModelParams init_params(const NetworkConfig& net, Rng& rng) {
    auto shapes = net.shape_check();
    ModelParams params;
    params.precision = net.precision;
    std::vector<std::size_t> cur = net.input_shape();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        ParamEntry entry;
        if (l.kind == LayerKind::Conv) {
            std::size_t in_channels = cur[0];
            std::size_t fan_in = in_channels * l.kernel * l.kernel;
            double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            entry.weight = Tensor({l.out_channels, in_channels, l.kernel, l.kernel});
            for (double& w : entry.weight.values()) w = rng.uniform(-bound, bound);
            entry.bias = Tensor({l.out_channels});
        } else if (l.kind == LayerKind::FullyConnected) {
            std::size_t fan_in = shape_product(cur);
            double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            entry.weight = Tensor({l.fan_out, fan_in});
            for (double& w : entry.weight.values()) w = rng.uniform(-bound, bound);
            entry.bias = Tensor({l.fan_out});
        }
        round_f32(entry.weight, net.precision);
        params.layers.push_back(std::move(entry));
        cur = shapes[i];
    }
    return params;
}

Gradients zero_like(const ModelParams& params) {
    Gradients g;
    g.precision = params.precision;
    for (const ParamEntry& e : params.layers) {
        ParamEntry z;
        if (e.weight.size() > 0) z.weight = Tensor::zeros(e.weight.shape());
        if (e.bias.size() > 0) z.bias = Tensor::zeros(e.bias.shape());
        g.layers.push_back(std::move(z));
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& grads, double scale) {
    for (std::size_t i = 0; i < into.layers.size(); ++i) {
        for (std::size_t j = 0; j < into.layers[i].weight.size(); ++j) {
            into.layers[i].weight[j] += scale * grads.layers[i].weight[j];
        }
        for (std::size_t j = 0; j < into.layers[i].bias.size(); ++j) {
            into.layers[i].bias[j] += scale * grads.layers[i].bias[j];
        }
    }
}

// --- forward ---

namespace {

Tensor conv_forward(const LayerSpec& l, const Tensor& x, const ParamEntry& p) {
    std::size_t in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    std::size_t out_h = conv_out_extent(in_h, l.kernel, l.stride);
    std::size_t out_w = conv_out_extent(in_w, l.kernel, l.stride);
    Tensor y({l.out_channels, out_h, out_w});
    const double* W = p.weight.data();
    std::size_t k = l.kernel;
    for (std::size_t o = 0; o < l.out_channels; ++o) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                double acc = p.bias[o];
                std::size_t ih0 = oh * l.stride, iw0 = ow * l.stride;
                for (std::size_t c = 0; c < in_c; ++c) {
                    const double* xrow = x.data() + (c * in_h + ih0) * in_w + iw0;
                    const double* wrow = W + ((o * in_c + c) * k) * k;
                    for (std::size_t i = 0; i < k; ++i) {
                        for (std::size_t j = 0; j < k; ++j) {
                            acc += wrow[i * k + j] * xrow[i * in_w + j];
                        }
                    }
                }
                y.at(o, oh, ow) = acc;
            }
        }
    }
    return y;
}

void conv_backward(const LayerSpec& l, const Tensor& x, const ParamEntry& p, const Tensor& dy,
                   ParamEntry& dp, Tensor& dx) {
    std::size_t in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    std::size_t out_h = dy.dim(1), out_w = dy.dim(2);
    std::size_t k = l.kernel;
    dp.weight = Tensor::zeros(p.weight.shape());
    dp.bias = Tensor::zeros(p.bias.shape());
    dx = Tensor::zeros(x.shape());
    for (std::size_t o = 0; o < l.out_channels; ++o) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                double g = dy.at(o, oh, ow);
                if (g == 0.0) continue;
                dp.bias[o] += g;
                std::size_t ih0 = oh * l.stride, iw0 = ow * l.stride;
                for (std::size_t c = 0; c < in_c; ++c) {
                    const double* xrow = x.data() + (c * in_h + ih0) * in_w + iw0;
                    double* dxrow = dx.data() + (c * in_h + ih0) * in_w + iw0;
                    double* dwrow = dp.weight.data() + ((o * in_c + c) * k) * k;
                    const double* wrow = p.weight.data() + ((o * in_c + c) * k) * k;
                    for (std::size_t i = 0; i < k; ++i) {
                        for (std::size_t j = 0; j < k; ++j) {
                            dwrow[i * k + j] += g * xrow[i * in_w + j];
                            dxrow[i * in_w + j] += g * wrow[i * k + j];
                        }
                    }
                }
            }
        }
    }
}

Tensor maxpool_forward(const LayerSpec& l, const Tensor& x, Tensor& argmax) {
    std::size_t c_n = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    std::size_t out_h = conv_out_extent(in_h, l.window, l.stride);
    std::size_t out_w = conv_out_extent(in_w, l.window, l.stride);
    Tensor y({c_n, out_h, out_w});
    argmax = Tensor({c_n, out_h, out_w});
    for (std::size_t c = 0; c < c_n; ++c) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                std::size_t ih0 = oh * l.stride, iw0 = ow * l.stride;
                double best = x.at(c, ih0, iw0);
                std::size_t best_idx = (c * in_h + ih0) * in_w + iw0;
                for (std::size_t i = 0; i < l.window; ++i) {
                    for (std::size_t j = 0; j < l.window; ++j) {
                        double v = x.at(c, ih0 + i, iw0 + j);
                        if (v > best) {
                            best = v;
                            best_idx = (c * in_h + ih0 + i) * in_w + iw0 + j;
                        }
                    }
                }
                y.at(c, oh, ow) = best;
                argmax.at(c, oh, ow) = static_cast<double>(best_idx);
            }
        }
    }
    return y;
}

Tensor lrn_forward(const LayerSpec& l, const Tensor& x, Tensor& denom) {
    std::size_t c_n = x.dim(0), h_n = x.dim(1), w_n = x.dim(2);
    Tensor y(x.shape());
    denom = Tensor(x.shape());
    std::size_t half = l.lrn_n / 2;
    for (std::size_t h = 0; h < h_n; ++h) {
        for (std::size_t w = 0; w < w_n; ++w) {
            for (std::size_t c = 0; c < c_n; ++c) {
                std::size_t lo = c >= half ? c - half : 0;
                std::size_t hi = std::min(c_n - 1, c + half);
                double s = 0.0;
                for (std::size_t j = lo; j <= hi; ++j) {
                    double v = x.at(j, h, w);
                    s += v * v;
                }
                double d = l.lrn_k + (l.lrn_alpha / static_cast<double>(l.lrn_n)) * s;
                denom.at(c, h, w) = d;
                y.at(c, h, w) = x.at(c, h, w) * std::pow(d, -l.lrn_beta);
            }
        }
    }
    return y;
}

Tensor lrn_backward(const LayerSpec& l, const Tensor& x, const Tensor& denom,
                    const Tensor& dy) {
    std::size_t c_n = x.dim(0), h_n = x.dim(1), w_n = x.dim(2);
    Tensor dx = Tensor::zeros(x.shape());
    std::size_t half = l.lrn_n / 2;
    double coef = 2.0 * l.lrn_alpha * l.lrn_beta / static_cast<double>(l.lrn_n);
    for (std::size_t h = 0; h < h_n; ++h) {
        for (std::size_t w = 0; w < w_n; ++w) {
            for (std::size_t c = 0; c < c_n; ++c) {
                double d = denom.at(c, h, w);
                double g = dy.at(c, h, w);
                dx.at(c, h, w) += g * std::pow(d, -l.lrn_beta);
                if (g == 0.0) continue;
                // x_m appears in the denominator of every channel whose window contains m
                double common = g * x.at(c, h, w) * std::pow(d, -l.lrn_beta - 1.0) * coef;
                std::size_t lo = c >= half ? c - half : 0;
                std::size_t hi = std::min(c_n - 1, c + half);
                for (std::size_t m = lo; m <= hi; ++m) {
                    dx.at(m, h, w) -= common * x.at(m, h, w);
                }
            }
        }
    }
    return dx;
}

Tensor fc_forward(const Tensor& x, const ParamEntry& p) {
    std::size_t fan_out = p.weight.dim(0), fan_in = p.weight.dim(1);
    if (x.size() != fan_in) {
        throw ShapeError("fully_connected input size " + std::to_string(x.size()) +
                         " does not match weight fan-in " + std::to_string(fan_in));
    }
    Tensor y({fan_out});
    for (std::size_t o = 0; o < fan_out; ++o) {
        double acc = p.bias[o];
        const double* wrow = p.weight.data() + o * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
    return y;
}

}  // namespace

ForwardTrace forward(const NetworkConfig& net, const ModelParams& params, const Tensor& x,
                     RunMode mode, Rng* rng, const InjectedFeatures* injected) {
    if (params.layers.size() != net.layers.size()) {
        throw UsageError("forward: params do not match network layer count");
    }
    if (x.shape() != net.input_shape()) {
        throw ShapeError("forward: input shape " + x.shape_str() + " does not match network " +
                         shape_to_string(net.input_shape()));
    }
    ForwardTrace trace;
    trace.mode = mode;
    trace.layers.resize(net.layers.size());
    Tensor cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        LayerTrace& lt = trace.layers[i];
        lt.input = cur;
        switch (l.kind) {
            case LayerKind::Conv:
                cur = conv_forward(l, cur, params.layers[i]);
                break;
            case LayerKind::MaxPool:
                cur = maxpool_forward(l, cur, lt.aux);
                break;
            case LayerKind::Relu: {
                Tensor y = cur;
                for (double& v : y.values()) v = std::max(v, 0.0);
                cur = std::move(y);
                break;
            }
            case LayerKind::Lrn:
                cur = lrn_forward(l, cur, lt.aux);
                break;
            case LayerKind::FullyConnected: {
                Tensor flat({cur.size()}, cur.values());
                cur = fc_forward(flat, params.layers[i]);
                break;
            }
            case LayerKind::Dropout: {
                if (mode == RunMode::Train && l.rate > 0.0) {
                    if (!rng) throw UsageError("forward: train-mode dropout requires an rng");
                    double keep = 1.0 - l.rate;
                    Tensor mask(cur.shape());
                    for (double& m : mask.values()) {
                        m = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
                    }
                    Tensor y = cur;
                    for (std::size_t j = 0; j < y.size(); ++j) y[j] *= mask[j];
                    lt.aux = std::move(mask);
                    cur = std::move(y);
                }
                // eval mode is a pure identity (inverted scaling at train time)
                break;
            }
            case LayerKind::L2Norm:
                cur = l2_normalize(cur);
                break;
            case LayerKind::ConcatInject: {
                if (!injected) throw UsageError("forward: concat_inject layer requires injected features");
                if (injected->normalized.size() != l.inject_width) {
                    throw ShapeError("concat_inject: injected width " +
                                     std::to_string(injected->normalized.size()) +
                                     " does not match configured " +
                                     std::to_string(l.inject_width));
                }
                if (!injected->normalized.all_finite()) {
                    throw NumericError("concat_inject: non-finite normalized score");
                }
                std::vector<double> joined = cur.values();
                joined.insert(joined.end(), injected->normalized.values().begin(),
                              injected->normalized.values().end());
                cur = Tensor::from_vector(std::move(joined));
                break;
            }
        }
        round_f32(cur, net.precision);
        lt.output = cur;
    }
    trace.output = cur;
    return trace;
}

BackwardResult backward(const NetworkConfig& net, const ModelParams& params,
                        const ForwardTrace& trace, const Tensor& upstream_grad) {
    if (trace.layers.size() != net.layers.size()) {
        throw UsageError("backward: activation cache does not match network");
    }
    BackwardResult result;
    result.grads = zero_like(params);
    Tensor dy = upstream_grad;
    for (std::size_t idx = net.layers.size(); idx-- > 0;) {
        const LayerSpec& l = net.layers[idx];
        const LayerTrace& lt = trace.layers[idx];
        Tensor dx;
        switch (l.kind) {
            case LayerKind::Conv:
                conv_backward(l, lt.input, params.layers[idx], dy, result.grads.layers[idx], dx);
                break;
            case LayerKind::MaxPool: {
                dx = Tensor::zeros(lt.input.shape());
                for (std::size_t j = 0; j < dy.size(); ++j) {
                    dx[static_cast<std::size_t>(lt.aux[j])] += dy[j];
                }
                break;
            }
            case LayerKind::Relu: {
                dx = dy;
                for (std::size_t j = 0; j < dx.size(); ++j) {
                    if (lt.input[j] <= 0.0) dx[j] = 0.0;
                }
                break;
            }
            case LayerKind::Lrn:
                dx = lrn_backward(l, lt.input, lt.aux, dy);
                break;
            case LayerKind::FullyConnected: {
                std::size_t fan_out = params.layers[idx].weight.dim(0);
                std::size_t fan_in = params.layers[idx].weight.dim(1);
                ParamEntry& dp = result.grads.layers[idx];
                Tensor flat_dx({fan_in});
                const Tensor& xin = lt.input;
                for (std::size_t o = 0; o < fan_out; ++o) {
                    double g = dy[o];
                    dp.bias[o] += g;
                    double* dwrow = dp.weight.data() + o * fan_in;
                    const double* wrow = params.layers[idx].weight.data() + o * fan_in;
                    if (g == 0.0) continue;
                    for (std::size_t i = 0; i < fan_in; ++i) {
                        dwrow[i] += g * xin[i];
                        flat_dx[i] += g * wrow[i];
                    }
                }
                dx = Tensor(xin.shape(), std::move(flat_dx.values()));
                break;
            }
            case LayerKind::Dropout: {
                dx = dy;
                if (trace.mode == RunMode::Train && l.rate > 0.0 && lt.aux.size() > 0) {
                    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] *= lt.aux[j];
                }
                break;
            }
            case LayerKind::L2Norm: {
                const Tensor& xin = lt.input;
                double norm = l2_norm(xin);
                double r = std::max(norm, kL2Epsilon);
                dx = Tensor(xin.shape());
                if (norm > kL2Epsilon) {
                    const Tensor& y = lt.output;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < y.size(); ++j) dot += y[j] * dy[j];
                    for (std::size_t j = 0; j < y.size(); ++j) {
                        dx[j] = (dy[j] - y[j] * dot) / r;
                    }
                } else {
                    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = dy[j] / r;
                }
                break;
            }
            case LayerKind::ConcatInject: {
                // the injected segment is a constant input; no gradient flows into it
                std::size_t n = lt.input.size();
                dx = Tensor({n});
                for (std::size_t j = 0; j < n; ++j) dx[j] = dy[j];
                break;
            }
        }
        round_f32(dx, net.precision);
        dy = std::move(dx);
    }
    result.input_grad = std::move(dy);
    return result;
}

void sgd_step(ModelParams& params, const Gradients& grads, SgdState& state, double lr,
              double momentum, double weight_decay) {
    if (lr <= 0.0) throw UsageError("sgd_step: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw UsageError("sgd_step: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw UsageError("sgd_step: weight decay must be non-negative");
    if (!grads.all_finite()) throw NumericError("sgd_step: non-finite gradient, training aborted");
    if (state.momentum.layers.empty()) state.momentum = zero_like(params);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto step = [&](Tensor& p, const Tensor& g, Tensor& v) {
            for (std::size_t j = 0; j < p.size(); ++j) {
                v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
                p[j] -= lr * v[j];
            }
            round_f32(p, params.precision);
        };
        if (params.layers[i].weight.size() > 0) {
            step(params.layers[i].weight, grads.layers[i].weight, state.momentum.layers[i].weight);
            step(params.layers[i].bias, grads.layers[i].bias, state.momentum.layers[i].bias);
        }
    }
}

SoftmaxXentResult softmax_xent_loss(const Tensor& logits, std::size_t label) {
    if (label >= logits.size()) {
        throw UsageError("softmax_xent_loss: label " + std::to_string(label) +
                         " out of range for " + std::to_string(logits.size()) + " classes");
    }
    double mx = logits[0];
    for (double v : logits.values()) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits.values()) sum += std::exp(v - mx);
    double lse = mx + std::log(sum);
    SoftmaxXentResult r;
    r.loss = lse - logits[label];
    r.grad = Tensor(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.grad[i] = std::exp(logits[i] - lse) - (i == label ? 1.0 : 0.0);
    }
    return r;
}

}  // namespace agfv
