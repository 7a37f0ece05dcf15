#include "lesion_triage/nn/modules.hpp"

#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"

namespace lt::nn {

namespace F = torch::nn::functional;
using torch::nn::Conv2dOptions;

namespace {

// Sequential with a concrete forward so it can nest inside other containers.
struct BlockImpl : torch::nn::SequentialImpl {
  using SequentialImpl::SequentialImpl;
  torch::Tensor forward(torch::Tensor x) { return SequentialImpl::forward(x); }
};
TORCH_MODULE(Block);

Block conv_bn(int in, int out, torch::ExpandingArray<2> k, torch::ExpandingArray<2> stride = 1,
                   torch::ExpandingArray<2> pad = 0, double bn_eps = 1e-3) {
  return Block(torch::nn::Conv2d(Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(false)),
                    torch::nn::BatchNorm2d(torch::nn::BatchNorm2dOptions(out).eps(bn_eps)),
                    torch::nn::ReLU());
}

// Parallel branches concatenated on the channel axis.
struct ConcatImpl : torch::nn::Module {
  explicit ConcatImpl(std::vector<Block> bs) {
    for (std::size_t i = 0; i < bs.size(); ++i) branches.push_back(register_module("b" + std::to_string(i), bs[i]));
  }
  torch::Tensor forward(torch::Tensor x) {
    std::vector<torch::Tensor> outs;
    for (auto& b : branches) outs.push_back(b->forward(x));
    return torch::cat(outs, 1);
  }
  std::vector<Block> branches;
};
TORCH_MODULE(Concat);

// x + scale * up(concat(branches(x))), optionally rectified.
struct ResidualImpl : torch::nn::Module {
  ResidualImpl(std::vector<Block> bs, int branch_ch, int ch, double scale, bool relu)
      : scale(scale), relu(relu) {
    branches = register_module("branches", Concat(std::move(bs)));
    up = register_module("up", torch::nn::Conv2d(Conv2dOptions(branch_ch, ch, 1).bias(true)));
  }
  torch::Tensor forward(torch::Tensor x) {
    auto y = x + scale * up->forward(branches->forward(x));
    return relu ? torch::relu(y) : y;
  }
  Concat branches{nullptr};
  torch::nn::Conv2d up{nullptr};
  double scale;
  bool relu;
};
TORCH_MODULE(Residual);

Residual block35(double scale) {
  return Residual(std::vector<Block>{conv_bn(320, 32, 1),
                   Block(conv_bn(320, 32, 1), conv_bn(32, 32, 3, 1, 1)),
                   Block(conv_bn(320, 32, 1), conv_bn(32, 48, 3, 1, 1), conv_bn(48, 64, 3, 1, 1))},
                  128, 320, scale, true);
}

Residual block17(double scale) {
  return Residual(std::vector<Block>{conv_bn(1088, 192, 1),
                   Block(conv_bn(1088, 128, 1), conv_bn(128, 160, {1, 7}, 1, {0, 3}),
                              conv_bn(160, 192, {7, 1}, 1, {3, 0}))},
                  384, 1088, scale, true);
}

Residual block8(double scale, bool relu) {
  return Residual(std::vector<Block>{conv_bn(2080, 192, 1),
                   Block(conv_bn(2080, 192, 1), conv_bn(192, 224, {1, 3}, 1, {0, 1}),
                              conv_bn(224, 256, {3, 1}, 1, {1, 0}))},
                  448, 2080, scale, relu);
}

Block max_pool3s2() {
  return Block(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2)));
}

std::vector<torch::Tensor> all_but(torch::nn::Module& m, torch::nn::Module& head) {
  std::vector<torch::Tensor> out;
  auto skip = head.parameters();
  for (auto& p : m.parameters()) {
    bool in_head = false;
    for (auto& h : skip) in_head = in_head || p.is_same(h);
    if (!in_head) out.push_back(p);
  }
  return out;
}

}  // namespace

SmallCNN::SmallCNN(int width, int classes) {
  body = register_module(
      "body", torch::nn::Sequential(conv_bn(3, width, 3, 1, 1, 1e-5), torch::nn::MaxPool2d(2),
                         conv_bn(width, 2 * width, 3, 1, 1, 1e-5), torch::nn::MaxPool2d(2),
                         conv_bn(2 * width, 4 * width, 3, 1, 1, 1e-5)));
  fc = register_module("fc", torch::nn::Linear(8 * width, classes));
}

torch::Tensor SmallCNN::features(torch::Tensor x) { return body->forward(x); }

torch::Tensor SmallCNN::head(torch::Tensor f) {
  return fc->forward(torch::cat({f.mean({2, 3}), f.amax({2, 3})}, 1));
}

std::vector<torch::Tensor> SmallCNN::backbone_parameters() { return body->parameters(); }

InceptionResNetV2::InceptionResNetV2(int classes) {
  torch::nn::Sequential s;
  s->push_back(conv_bn(3, 32, 3, 2));
  s->push_back(conv_bn(32, 32, 3));
  s->push_back(conv_bn(32, 64, 3, 1, 1));
  s->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2)));
  s->push_back(conv_bn(64, 80, 1));
  s->push_back(conv_bn(80, 192, 3));
  s->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2)));
  s->push_back(Concat(std::vector<Block>{
      conv_bn(192, 96, 1), Block(conv_bn(192, 48, 1), conv_bn(48, 64, 5, 1, 2)),
      Block(conv_bn(192, 64, 1), conv_bn(64, 96, 3, 1, 1), conv_bn(96, 96, 3, 1, 1)),
      Block(torch::nn::AvgPool2d(torch::nn::AvgPool2dOptions(3).stride(1).padding(1).count_include_pad(false)),
                 conv_bn(192, 64, 1))}));
  for (int i = 0; i < 10; ++i) s->push_back(block35(0.17));
  s->push_back(Concat(std::vector<Block>{
      conv_bn(320, 384, 3, 2), Block(conv_bn(320, 256, 1), conv_bn(256, 256, 3, 1, 1), conv_bn(256, 384, 3, 2)),
      max_pool3s2()}));
  for (int i = 0; i < 20; ++i) s->push_back(block17(0.10));
  s->push_back(Concat(std::vector<Block>{
      Block(conv_bn(1088, 256, 1), conv_bn(256, 384, 3, 2)),
      Block(conv_bn(1088, 256, 1), conv_bn(256, 288, 3, 2)),
      Block(conv_bn(1088, 256, 1), conv_bn(256, 288, 3, 1, 1), conv_bn(288, 320, 3, 2)), max_pool3s2()}));
  for (int i = 0; i < 9; ++i) s->push_back(block8(0.20, true));
  s->push_back(block8(1.0, false));
  s->push_back(conv_bn(2080, 1536, 1));
  body = register_module("body", s);
  dropout = register_module("dropout", torch::nn::Dropout(0.2));
  fc = register_module("fc", torch::nn::Linear(1536, classes));
}

torch::Tensor InceptionResNetV2::features(torch::Tensor x) { return body->forward(x); }

torch::Tensor InceptionResNetV2::head(torch::Tensor f) { return fc->forward(dropout->forward(f.mean({2, 3}))); }

std::vector<torch::Tensor> InceptionResNetV2::backbone_parameters() { return all_but(*this, *fc); }

namespace {

torch::nn::Sequential double_conv(int in, int out) {
  return torch::nn::Sequential(conv_bn(in, out, 3, 1, 1, 1e-5), conv_bn(out, out, 3, 1, 1, 1e-5));
}

}  // namespace

UNetImpl::UNetImpl(int depth, int base) {
  int ch = 3;
  for (int i = 0; i < depth; ++i) {
    const int next = base << i;
    down.push_back(register_module("down" + std::to_string(i), double_conv(ch, next)));
    ch = next;
  }
  bottleneck = register_module("bottleneck", double_conv(ch, ch * 2));
  ch *= 2;
  for (int i = depth - 1; i >= 0; --i) {
    const int skip = base << i;
    up.push_back(register_module("up" + std::to_string(i),
                                 torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(ch, skip, 2).stride(2))));
    merge.push_back(register_module("merge" + std::to_string(i), double_conv(2 * skip, skip)));
    ch = skip;
  }
  out = register_module("out", torch::nn::Conv2d(Conv2dOptions(ch, 1, 1)));
}

torch::Tensor UNetImpl::forward(torch::Tensor x) {
  std::vector<torch::Tensor> skips;
  for (auto& d : down) {
    x = d->forward(x);
    skips.push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
  }
  x = bottleneck->forward(x);
  for (std::size_t i = 0; i < up.size(); ++i) {
    x = up[i]->forward(x);
    x = merge[i]->forward(torch::cat({skips[skips.size() - 1 - i], x}, 1));
  }
  return out->forward(x);
}

std::shared_ptr<ClassifierNet> make_classifier_net(const cls::ClsModelConfig& config) {
  switch (config.backbone) {
    case cls::Backbone::SmallCNN: return std::make_shared<SmallCNN>(config.width, static_cast<int>(kNumClasses));
    case cls::Backbone::InceptionResNetV2: return std::make_shared<InceptionResNetV2>(static_cast<int>(kNumClasses));
  }
  throw Error(ErrorKind::InvalidArgument, "unknown backbone");
}

torch::Tensor to_input(const cv::Mat& rgb, int size) {
  if (rgb.empty() || rgb.type() != CV_8UC3) throw Error(ErrorKind::UndecodableImage, "expected an RGB image");
  cv::Mat resized = rgb;
  if (rgb.cols != size || rgb.rows != size) {
    const bool shrink = rgb.cols > size || rgb.rows > size;
    cv::resize(rgb, resized, {size, size}, 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  }
  cv::Mat f;
  resized.convertTo(f, CV_32FC3, 1.0 / 127.5, -1.0);
  return torch::from_blob(f.data, {size, size, 3}, torch::kFloat32).permute({2, 0, 1}).unsqueeze(0).clone();
}

torch::Tensor to_batch(std::span<const cv::Mat> images, int size) {
  std::vector<torch::Tensor> ts;
  ts.reserve(images.size());
  for (const auto& im : images) ts.push_back(to_input(im, size));
  return torch::cat(ts, 0);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a simple combination.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) + 0xBF58476D1CE4E5B9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace lt::nn
