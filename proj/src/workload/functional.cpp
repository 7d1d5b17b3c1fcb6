#include <algorithm>
#include <cmath>

#include "hsa/workload.hpp"
#include "internal.hpp"

namespace hsa::workload {
namespace {

using core::HsaConfig;

// Static activation scales: 25% headroom over the calibration maximum.
constexpr float kCalibrationHeadroom = 1.25f;

std::string suffix(const std::string& name) {
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

quant::Int8Tensor transpose_int8(const quant::Int8Tensor& w) {
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  quant::Int8Tensor t;
  t.shape = {cols, rows};
  t.scale = w.scale;
  t.values.resize(w.values.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t.values[j * rows + i] = w.values[i * cols + j];
  return t;
}

void accumulate_phase(PhaseCost& total, const PhaseCost& step) {
  if (total.ops.empty()) {
    total = step;
    return;
  }
  total.cycles += step.cycles;
  total.ledger += step.ledger;
  total.ppu_cycles += step.ppu_cycles;
  for (std::size_t i = 0; i < step.ops.size(); ++i) {
    total.ops[i].cycles += step.ops[i].cycles;
    total.ops[i].ledger += step.ops[i].ledger;
    total.ops[i].ppu_cycles += step.ops[i].ppu_cycles;
  }
}

std::uint32_t argmax(std::span<const float> v) {
  return static_cast<std::uint32_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

class Engine {
 public:
  Engine(const Model& model, const HsaConfig& cfg, ActivationStats calibration)
      : model_(model), mc_(model.graph.model), cfg_(cfg), calib_(std::move(calibration)) {}

  PhaseCost prefill(std::span<const std::uint32_t> tokens, SequenceState& st, std::vector<float>& logits) {
    decode_ = false;
    return run(tokens, st, nullptr, logits);
  }

  PhaseCost decode(std::uint32_t token, SequenceState& st, ppu::AngleMemory& mem, std::vector<float>& logits) {
    decode_ = true;
    const std::uint32_t t[1] = {token};
    return run(t, st, &mem, logits);
  }

 private:
  float scale_for(const std::string& site) const {
    auto it = calib_.find(site);
    const float m = it == calib_.end() ? 0.0f : it->second;
    return m > 0.0f ? m * kCalibrationHeadroom / 127.0f : 1.0f;
  }

  const quant::Int8Tensor& transposed(const std::string& op) {
    auto it = transposed_.find(op);
    if (it == transposed_.end()) {
      it = transposed_.emplace(op, transpose_int8(model_.quantized_matrix(op).int8)).first;
    }
    return it->second;
  }

  // One weight-bearing op. `in` has one row per token; when the op consumes a
  // fused norm, gamma is applied on the way in and sigma_inv per row on the
  // way out, never materializing the normalized vector.
  Matrix<float> project(const LayerOp& op, const Matrix<float>& in, OpCost& cost) {
    const std::size_t rows = in.rows;
    const std::size_t K = op.in_dim;
    const std::size_t N = op.out_dim;
    Matrix<float> x = in;
    std::vector<float> sig(rows, 1.0f);
    const ppu::NormParams* norm = op.fused_norm_input ? &model_.norm(op.norm) : nullptr;
    if (norm) {
      for (std::size_t n = 0; n < rows; ++n) {
        sig[n] = ppu::sigma_inverse(in.row(n), norm->epsilon);
        for (std::size_t j = 0; j < K; ++j) x(n, j) *= norm->gamma[j];
      }
    }
    const float s_a = scale_for(norm ? op.norm : op.name);
    const auto xq = quant::quantize_activation_int8(x.data, s_a, {rows, K});
    const QuantizedMatrix& qm = model_.quantized_matrix(op.name);

    Matrix<float> out(rows, N);
    mem::TrafficLedger& lg = cost.ledger;
    if (decode_) {
      const quant::Int8Tensor xv{{K}, xq.values, s_a};
      const bool mx = mc_.weight_precision == quant::WeightFormat::kMxInt4;
      const core::MvmResult r = mx ? core::run_mvm(qm.mx, xv, cfg_) : core::run_mvm(qm.int8, xv, cfg_);
      const float w_scale = mx ? qm.mx.tensor_scale : qm.int8.scale;
      const std::uint64_t bytes = mx ? qm.mx.payload_bytes() : qm.int8.values.size();
      for (std::size_t i = 0; i < N; ++i) out(0, i) = static_cast<float>(r.out[i]) * (s_a * w_scale) * sig[0];
      cost.cycles += r.cycles;
      lg.dram_weight_bytes += bytes;
      lg.weight_sram_writes += bytes;
      lg.weight_sram_reads += bytes;
      lg.activation_sram_reads += r.activation_reads;
      lg.activation_sram_writes += r.out.size();
      lg.mac_ops += r.mac_ops;
      lg.enabled_pe_cycles += r.enabled_pe_cycles;
    } else {
      const quant::Int8Tensor& wt = transposed(op.name);  // [K x N]
      const MmmSchedule sched = tile_mmm(rows, K, N, cfg_);
      Matrix<std::int64_t> acc(rows, N);
      for (std::size_t c0 = 0; c0 < rows; c0 += sched.chunk_rows) {
        const std::size_t cr = std::min<std::size_t>(sched.chunk_rows, rows - c0);
        for (std::size_t k0 = 0; k0 < K; k0 += sched.k_segment) {
          const std::size_t kl = std::min<std::size_t>(sched.k_segment, K - k0);
          quant::Int8Tensor a{{cr, kl}, std::vector<std::int8_t>(cr * kl), s_a};
          for (std::size_t i = 0; i < cr; ++i)
            for (std::size_t j = 0; j < kl; ++j) a.values[i * kl + j] = xq.values[(c0 + i) * K + k0 + j];
          quant::Int8Tensor b{{kl, N}, std::vector<std::int8_t>(wt.values.begin() + static_cast<std::ptrdiff_t>(k0 * N),
                                                                wt.values.begin() + static_cast<std::ptrdiff_t>((k0 + kl) * N)),
                              wt.scale};
          const core::MmmResult r = core::run_mmm(a, b, {op.transpose_out, 0}, cfg_);
          for (std::size_t i = 0; i < cr; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
              const std::int32_t v = op.transpose_out ? r.out(j, i) : r.out(i, j);
              std::int64_t& dst = acc(c0 + i, j);
              dst += v;
              if (dst > INT32_MAX || dst < INT32_MIN) {
                fail(ErrorCode::kAccumulatorOverflow, op.name + " partial-sum merge exceeds 32 bits");
              }
            }
          }
          cost.cycles += r.cycles;
          lg.dram_weight_bytes += b.values.size();
          lg.weight_sram_writes += b.values.size();
          lg.weight_sram_reads += r.weight_reads;
          lg.dram_activation_bytes += a.values.size();
          lg.activation_sram_writes += a.values.size();
          lg.activation_sram_reads += r.activation_reads;
          lg.mac_ops += r.mac_ops;
          lg.enabled_pe_cycles += static_cast<std::uint64_t>(cfg_.pe_count()) * r.cycles.compute;
        }
      }
      lg.dram_activation_bytes += rows * N;
      for (std::size_t n = 0; n < rows; ++n)
        for (std::size_t j = 0; j < N; ++j)
          out(n, j) = static_cast<float>(acc(n, j)) * (s_a * wt.scale) * sig[n];
    }
    if (norm && norm->has_beta()) {
      const auto bias = ppu::fold_bias(model_.matrix(op.name), norm->beta, 1.0f);
      for (std::size_t n = 0; n < rows; ++n)
        for (std::size_t j = 0; j < N; ++j) out(n, j) += bias[j];
    }
    cost.ppu_cycles += ppu_pass_cycles(rows * N, cfg_);
    return out;
  }

  void rope(Matrix<float>& m, std::uint64_t first_pos, const ppu::AngleMemory* mem) const {
    for (std::size_t n = 0; n < m.rows; ++n) {
      for (std::uint64_t h = 0; h < mc_.num_heads; ++h) {
        auto head = m.row(n).subspan(h * mc_.head_dim, mc_.head_dim);
        if (mem) {
          mem->embed(head);
        } else {
          ppu::rope_embed_direct(head, first_pos + n, mc_.rope_base);
        }
      }
    }
  }

  PhaseCost run(std::span<const std::uint32_t> tokens, SequenceState& st, ppu::AngleMemory* mem,
                std::vector<float>& logits) {
    const LayerGraph& graph = model_.graph;
    const std::size_t M = tokens.size();
    const std::size_t dk = mc_.head_dim;
    const std::size_t dv = mc_.head_value_dim();
    const std::uint64_t first_pos = st.position;
    PhaseCost phase;

    Matrix<float> x(M, mc_.hidden_dim);
    Matrix<float> q, k, v, g, o, up;
    for (const LayerOp& op : graph.ops) {
      OpCost cost = decode_ ? op_cost_decode(graph, op, cfg_, mc_.weight_precision)
                            : op_cost_prefill(graph, op, M, cfg_);
      const std::string tag = suffix(op.name);
      switch (op.kind) {
        case OpKind::kEmbed:
          for (std::size_t n = 0; n < M; ++n) {
            if (tokens[n] >= mc_.vocab_size) fail(ErrorCode::kShapeMismatch, "token outside the vocabulary");
            auto r = model_.embedding.row(tokens[n]);
            std::copy(r.begin(), r.end(), x.row(n).begin());
          }
          break;
        case OpKind::kNorm:
        case OpKind::kResidual:
        case OpKind::kActivation:
        case OpKind::kGate:
          // Norms are folded into their consumers; the rest are applied where
          // their inputs are produced below.
          if (op.kind == OpKind::kGate) {
            for (std::size_t n = 0; n < M; ++n)
              for (std::size_t i = 0; i < o.cols; ++i)
                o(n, i) *= ppu::activation(g(n, i), ppu::ActivationKind::kSilu);
          } else if (op.kind == OpKind::kActivation) {
            ppu::apply_activation(up.data, op.activation);
          }
          break;
        case OpKind::kProjection: {
          cost.cycles = {};
          cost.ledger = {};
          cost.ppu_cycles = 0;
          if (tag == "q_proj") q = project(op, x, cost);
          else if (tag == "k_proj") k = project(op, x, cost);
          else if (tag == "v_proj") v = project(op, x, cost);
          else if (tag == "g_proj") g = project(op, x, cost);
          else if (tag == "ffn_up") up = project(op, x, cost);
          else {
            const Matrix<float> y = project(op, tag == "o_proj" ? o : up, cost);
            for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
          }
          break;
        }
        case OpKind::kRope: {
          rope(q, first_pos, mem);
          rope(k, first_pos, mem);
          const float s = 1.0f / std::sqrt(static_cast<float>(dk));
          for (float& e : k.data) e *= s;
          break;
        }
        case OpKind::kRetention: {
          auto& heads = st.layers[static_cast<std::size_t>(op.layer)].heads;
          o = Matrix<float>(M, mc_.value_dim());
          for (std::uint64_t h = 0; h < mc_.num_heads; ++h) {
            if (decode_) {
              detail::retention_step(heads[h], model_.decay(h), q.row(0).subspan(h * dk, dk),
                                     k.row(0).subspan(h * dk, dk), v.row(0).subspan(h * dv, dv),
                                     o.row(0).subspan(h * dv, dv));
              continue;
            }
            Matrix<float> qh(M, dk), kh(M, dk), vh(M, dv);
            for (std::size_t n = 0; n < M; ++n) {
              for (std::size_t a = 0; a < dk; ++a) {
                qh(n, a) = q(n, h * dk + a);
                kh(n, a) = k(n, h * dk + a);
              }
              for (std::size_t b = 0; b < dv; ++b) vh(n, b) = v(n, h * dv + b);
            }
            const Matrix<float> oh = detail::retention_parallel(qh, kh, vh, model_.decay(h), heads[h]);
            for (std::size_t n = 0; n < M; ++n)
              for (std::size_t b = 0; b < dv; ++b) o(n, h * dv + b) = oh(n, b);
          }
          break;
        }
        case OpKind::kHead: {
          cost.cycles = {};
          cost.ledger = {};
          cost.ppu_cycles = 0;
          Matrix<float> last(1, mc_.hidden_dim);
          auto r = x.row(M - 1);
          std::copy(r.begin(), r.end(), last.row(0).begin());
          const Matrix<float> out = project(op, last, cost);
          logits = out.data;
          break;
        }
        case OpKind::kRopeUpdate:
          if (mem) mem->update();
          break;
      }
      if (op.kind != OpKind::kRopeUpdate || decode_) phase.add(std::move(cost));
    }
    st.position = first_pos + M;
    return phase;
  }

  const Model& model_;
  const ModelConfig& mc_;
  const HsaConfig& cfg_;
  ActivationStats calib_;
  std::map<std::string, quant::Int8Tensor> transposed_;
  bool decode_ = false;
};

}  // namespace

FunctionalRun run_functional(const Model& model, std::span<const std::uint32_t> prompt, std::uint64_t output_tokens,
                             const HsaConfig& cfg) {
  cfg.validate();
  if (prompt.empty()) fail(ErrorCode::kConfigError, "functional run needs a prompt");
  ActivationStats calibration;
  reference_prefill(model, prompt, nullptr, &calibration);

  Engine engine(model, cfg, std::move(calibration));
  FunctionalRun run;
  run.state = empty_state(model.graph.model);
  run.prefill = engine.prefill(prompt, run.state, run.prefill_logits);

  // Decode continues from the prompt length; the angle memory is seeded there
  // directly instead of replaying the prompt through Update mode.
  const ModelConfig& mc = model.graph.model;
  ppu::AngleMemory mem = ppu::AngleMemory::at_position(mc.head_dim, run.state.position, mc.rope_base);
  std::uint32_t next = argmax(run.prefill_logits);
  for (std::uint64_t t = 0; t < output_tokens; ++t) {
    run.decode_tokens.push_back(next);
    std::vector<float> logits;
    const PhaseCost step = engine.decode(next, run.state, mem, logits);
    accumulate_phase(run.decode, step);
    next = argmax(logits);
    run.decode_logits.push_back(std::move(logits));
  }
  return run;
}

}  // namespace hsa::workload
