#pragma once

#include <cstdint>
#include <vector>

#include "cryosr/image.hpp"
#include "cryosr/rng.hpp"

namespace cryosr {

// Dense CHW float32 tensor used by the networks. Images cross into
// tensors at module boundaries; all heavy arithmetic stays in float.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, float fill = 0.0f)
        : c(c_), h(h_), w(w_),
          v(static_cast<size_t>(c_) * h_ * w_, fill) {}

    float& at(int ch, int y, int x) {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    float at(int ch, int y, int x) const {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    float* plane(int ch) { return v.data() + static_cast<size_t>(ch) * h * w; }
    const float* plane(int ch) const {
        return v.data() + static_cast<size_t>(ch) * h * w;
    }
    size_t size() const { return v.size(); }
};

Tensor image_to_tensor(const Image2D& img);
Image2D tensor_to_image(const Tensor& t, double pixel_size, int channel = 0);

// A view over one parameter buffer and its gradient, used by the
// optimizer and the checkpoint writer. Order of registration defines the
// checkpoint layout.
struct ParamRef {
    float* w = nullptr;
    float* g = nullptr;
    size_t n = 0;
};

// 3x3 convolution, zero padded to "same" at stride 1; stride 2 halves
// spatial dimensions (ceil division).
struct Conv3x3 {
    int in_c = 0, out_c = 0, stride = 1;
    bool has_bias = true;
    std::vector<float> w, b, gw, gb;

    void init(int in_channels, int out_channels, int stride_, bool bias,
              Rng& rng);
    void init_zero(int in_channels, int out_channels);
    Tensor forward(const Tensor& x) const;
    // dx may be null when the input gradient is not needed.
    void backward(const Tensor& x, const Tensor& gy, Tensor* dx);
    void collect(std::vector<ParamRef>& out);
};

// Leaky rectifier, slope 0.1.
Tensor leaky_relu(const Tensor& x);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& gy);

// Global average pooling to a per-channel vector.
std::vector<float> global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<float>& gy, int c, int h, int w);

// Fully connected head.
struct Linear {
    int in_n = 0, out_n = 0;
    std::vector<float> w, b, gw, gb;

    void init(int in, int out, Rng& rng);
    void init_zero(int in, int out);
    std::vector<float> forward(const std::vector<float>& x) const;
    std::vector<float> backward(const std::vector<float>& x,
                                const std::vector<float>& gy);
    void collect(std::vector<ParamRef>& out);
};

// Adam with bias correction; lr is mutable so schedules can adjust it.
class Adam {
public:
    Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    std::vector<ParamRef> params_;
    std::vector<std::vector<float>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace cryosr
