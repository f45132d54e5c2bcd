#pragma once

#include <cstddef>
#include <string>

#include "pvc/conditioning.hpp"
#include "pvc/config.hpp"
#include "pvc/rng.hpp"
#include "pvc/tensor.hpp"
#include "pvc/vit.hpp"

namespace pvc {

struct CompressionParams {
  AdaLnParams adaln;           // over D = k^2 * C
  TemporalEmbeddingParams te;  // D_out = k^2 * C; separate from the ViT-side embeddings
  Tensor w_in, b_in;           // [D x F], [F]
  Tensor w_out, b_out;         // [F x C_out], [C_out]
};

CompressionParams make_compression(const PvcConfig& cfg);
// AdaLN/TE/MLP weights ~ N(0, 0.02^2), biases 0.
CompressionParams init_compression(const PvcConfig& cfg, Rng& rng);

void for_each_tensor(CompressionParams& p, const std::string& prefix, const TensorVisitor& f);
void for_each_tensor(const CompressionParams& p, const std::string& prefix, const ConstTensorVisitor& f);

// [B,T,N,C] -> [B,T,N/k^2,k^2*C]. Tokens sit on an n x n grid (row-major); each
// k x k block becomes one token whose channels are its k^2 source tokens in
// row-major block order.
Tensor pixel_shuffle(const Tensor& x, std::size_t k);
// Exact inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& x, std::size_t k);

// Intermediates of the compression head.
struct CompressionTrace {
  Tensor shuffled;  // x~ [B,T,M,D]
  Tensor te;        // [T,D]
  Tensor z;         // x~ + TE
  Tensor u;         // AdaLN(x~; z)
  Tensor pre;       // u . w_in + b_in
  Tensor hidden;    // SiLU(pre)
  Tensor out;       // [B,T,M,C_out]
};

CompressionTrace trace_compression(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg);

// v = MLP(AdaLN(x~; x~ + TE)) with x~ = pixel_shuffle(x, k).
Tensor compress(const VideoBatch& v, const CompressionParams& p, const PvcConfig& cfg);

}  // namespace pvc
