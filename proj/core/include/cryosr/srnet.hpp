#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cryosr/image.hpp"
#include "cryosr/motion.hpp"
#include "cryosr/tensor.hpp"

namespace cryosr {

// Architecture hyperparameters. Kernel size is fixed at 3, upsampling is
// bilinear outside the network; no resampling happens inside the encoder,
// fusion or decoder.
struct SrHyper {
    int channels = 32;
    int blocks = 4;
    int scale = 2;
};

struct ResBlockCtx {
    Tensor x, a, r;
};

struct ResBlock {
    Conv3x3 c1, c2;
    void init(int c, Rng& rng);
    Tensor forward(const Tensor& x, ResBlockCtx* ctx) const;
    Tensor backward(const Tensor& gy, const ResBlockCtx& ctx, bool need_dx);
    void collect(std::vector<ParamRef>& out);
};

struct EncoderCtx {
    Tensor x0, a1, h1, a2, h2;
    std::vector<ResBlockCtx> blocks;
};

struct FuseCtx {
    Tensor u, t1, r;
};

struct DecoderCtx {
    ResBlockCtx b1, b2;
    Tensor head_in;
};

struct SrForwardCtx {
    std::vector<EncoderCtx> leaves;
    std::vector<std::vector<FuseCtx>> fusion_levels;
    DecoderCtx decoder;
    int leaf_count = 0;
};

// The fusion network: shared encoder over (member, reference) pairs,
// recursive pairwise fusion of latent codes, residual decoder on top of
// the bilinearly upsampled reference. Fusing two equal codes returns the
// code unchanged, which makes member duplication a no-op and lets any K
// be padded to a power of two with reference copies.
class SrModel {
public:
    SrHyper hp;
    Conv3x3 enc1, enc2;
    std::vector<ResBlock> enc_blocks;
    Conv3x3 fuse1, fuse2;  // bias-free
    ResBlock dec1, dec2;
    Conv3x3 head;  // zero-initialized: untrained output = bilinear baseline

    static SrModel init(const SrHyper& hp, uint64_t seed);

    // ctx may be null for inference. Output is scale x member size;
    // pixel_size divides by scale.
    Image2D forward(const LrSet& lr_set, SrForwardCtx* ctx) const;
    void backward(const Image2D& d_out, SrForwardCtx& ctx);

    void collect_params(std::vector<ParamRef>& out);
    void zero_grad();
    size_t param_count();

private:
    Tensor encode(const Tensor& x0, EncoderCtx* ctx) const;
    Tensor encode_backward(const Tensor& gcode, EncoderCtx& ctx);
    Tensor fuse(const Tensor& a, const Tensor& b, FuseCtx* ctx) const;
    void fuse_backward(const Tensor& gout, const FuseCtx& ctx, Tensor& da,
                       Tensor& db);
};

struct ShiftCtx {
    std::vector<Tensor> conv_in;   // input to conv i; back() feeds the GAP
    std::vector<Tensor> conv_out;  // pre-activation conv outputs
    std::vector<float> pooled;
    std::vector<float> z;  // pre-tanh head output
    double sr_pixel_size = 1.0;
};

// Shift regressor: five stride-2 convolutions over the stacked (sr, hr)
// pair, global average pooling, linear head, tanh saturation to +-bound.
class ShiftModel {
public:
    int channels = 16;
    double bound = 8.0;
    std::vector<Conv3x3> convs;
    Linear head;  // zero-initialized: untrained estimate is (0, 0)

    static ShiftModel init(int channels, double bound, uint64_t seed);

    std::pair<double, double> forward(const Image2D& sr, const Image2D& hr,
                                      ShiftCtx* ctx) const;
    // d_sr, when non-null, receives the gradient with respect to the sr
    // input plane.
    void backward(double ddx, double ddy, ShiftCtx& ctx, Image2D* d_sr);

    void collect_params(std::vector<ParamRef>& out);
    void zero_grad();
    size_t param_count();
};

// MSE between the Lanczos-shifted sr and hr plus anisotropic total
// variation on sr, with exact gradients for the eps-smoothed objective
// (eps = 1e-6), including the shift parameters.
struct RegisteredLoss {
    double loss = 0;
    double mse = 0;
    double tv = 0;
    Image2D d_sr;
    double d_dx = 0;
    double d_dy = 0;
};

RegisteredLoss registered_loss(const Image2D& sr, const Image2D& hr,
                               std::pair<double, double> shift,
                               double tv_weight);

// Adjoint of lanczos_shift as a linear operator in the image argument.
Image2D lanczos_shift_adjoint(const Image2D& g, double dx, double dy, int a = 3);

// Derivative images d(lanczos_shift)/d(dx) and /d(dy).
Image2D lanczos_shift_ddx(const Image2D& img, double dx, double dy, int a = 3);
Image2D lanczos_shift_ddy(const Image2D& img, double dx, double dy, int a = 3);

// Versioned binary checkpoint: header with hyperparameters, then the
// flat little-endian float32 parameter payloads in registration order.
void save_checkpoint(const std::string& path, SrModel& sr, ShiftModel& shift);
std::pair<SrModel, ShiftModel> load_checkpoint(const std::string& path);

}  // namespace cryosr
