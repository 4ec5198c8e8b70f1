#include "ssvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "ssvae/objectives.hpp"
#include "ssvae/rng.hpp"

namespace ssvae {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double logsumexp(const std::vector<double>& terms) {
  double max = -std::numeric_limits<double>::infinity();
  for (double t : terms) max = std::max(max, t);
  if (!std::isfinite(max)) return max;
  double total = 0.0;
  for (double t : terms) total += std::exp(t - max);
  return max + std::log(total);
}

double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Induced tables shared by every objective, computed once per evaluation.
//   m[c][l]  = sum_x B[x][l] D[c][x]   (data row joined with z')
//   mp[x][k] = sum_c A[c][k] D[c][x]   (data column joined with z)
struct Tables {
  std::size_t nc, nx, nz, nzp;
  Matrix a, b;
  std::vector<double> dc, dx;
  Matrix m, mp;
  std::vector<double> qz, qzp;
  Matrix qzz;
};

Tables compute_tables(const ModelInstance& inst) {
  const JointDistribution& data = inst.data_joint();
  Tables t;
  t.nc = data.rows();
  t.nx = data.cols();
  t.a = inst.encoder_c().probabilities();
  t.b = inst.encoder_x().probabilities();
  t.nz = t.a.cols;
  t.nzp = t.b.cols;
  t.dc.assign(t.nc, 0.0);
  t.dx.assign(t.nx, 0.0);
  for (std::size_t c = 0; c < t.nc; ++c) {
    for (std::size_t x = 0; x < t.nx; ++x) {
      t.dc[c] += data.prob(c, x);
      t.dx[x] += data.prob(c, x);
    }
  }
  t.m = Matrix(t.nc, t.nzp, 0.0);
  t.mp = Matrix(t.nx, t.nz, 0.0);
  for (std::size_t c = 0; c < t.nc; ++c) {
    for (std::size_t x = 0; x < t.nx; ++x) {
      const double w = data.prob(c, x);
      if (w == 0.0) continue;
      for (std::size_t l = 0; l < t.nzp; ++l) {
        t.m.at(c, l) += t.b.at(x, l) * w;
      }
      for (std::size_t k = 0; k < t.nz; ++k) {
        t.mp.at(x, k) += t.a.at(c, k) * w;
      }
    }
  }
  t.qz.assign(t.nz, 0.0);
  t.qzp.assign(t.nzp, 0.0);
  for (std::size_t c = 0; c < t.nc; ++c) {
    for (std::size_t k = 0; k < t.nz; ++k) {
      t.qz[k] += t.a.at(c, k) * t.dc[c];
    }
  }
  for (std::size_t x = 0; x < t.nx; ++x) {
    for (std::size_t l = 0; l < t.nzp; ++l) {
      t.qzp[l] += t.b.at(x, l) * t.dx[x];
    }
  }
  t.qzz = Matrix(t.nz, t.nzp, 0.0);
  for (std::size_t c = 0; c < t.nc; ++c) {
    for (std::size_t k = 0; k < t.nz; ++k) {
      const double ak = t.a.at(c, k);
      if (ak == 0.0) continue;
      for (std::size_t l = 0; l < t.nzp; ++l) {
        t.qzz.at(k, l) += ak * t.m.at(c, l);
      }
    }
  }
  return t;
}

Matrix softmax_grid(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  double max = logits.data[0];
  for (double v : logits.data) max = std::max(max, v);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    out.data[i] = std::exp(logits.data[i] - max);
    total += out.data[i];
  }
  for (double& v : out.data) v /= total;
  return out;
}

// log Z_k = log sum_l Q(z')_l f(k,l), one entry per z.
std::vector<double> log_normalizers(const Tables& t,
                                    const CouplingFunction& f) {
  std::vector<double> log_z(t.nz, 0.0);
  std::vector<double> terms;
  terms.reserve(t.nzp);
  for (std::size_t k = 0; k < t.nz; ++k) {
    terms.clear();
    for (std::size_t l = 0; l < t.nzp; ++l) {
      if (t.qzp[l] == 0.0) continue;
      terms.push_back(std::log(t.qzp[l]) + f.log_value(k, l));
    }
    log_z[k] = logsumexp(terms);
  }
  return log_z;
}

void check_selector(const ModelInstance& inst, ObjectiveSelector objective) {
  const PriorSpec::Kind kind = inst.prior().kind();
  switch (objective) {
    case ObjectiveSelector::ElboTable:
      if (kind != PriorSpec::Kind::ExplicitTable) {
        throw ValidationError("elbo-table objective needs an explicit-table prior");
      }
      break;
    case ObjectiveSelector::ElboMi:
      if (kind != PriorSpec::Kind::MutualInformation) {
        throw ValidationError("elbo-mi objective needs the implicit MI prior");
      }
      break;
    case ObjectiveSelector::ElboInfoNce:
    case ObjectiveSelector::InfoNceExact:
      if (kind != PriorSpec::Kind::InfoNce) {
        throw ValidationError("contrastive objectives need an InfoNCE prior");
      }
      break;
    case ObjectiveSelector::Unstructured:
      break;
  }
}

// sum_{c,x} D(c,x) [log Dc(c) + log Dx(x)]
double expected_const_from(const Tables& t, const JointDistribution& data) {
  double acc = 0.0;
  for (std::size_t c = 0; c < t.nc; ++c) {
    for (std::size_t x = 0; x < t.nx; ++x) {
      const double w = data.prob(c, x);
      if (w == 0.0) continue;
      acc += w * (std::log(t.dc[c]) + std::log(t.dx[x]));
    }
  }
  return acc;
}

double c_side_const(const Tables& t) {
  double acc = 0.0;
  for (double w : t.dc) {
    if (w > 0.0) acc += w * std::log(w);
  }
  return acc;
}

double value_from_tables(const ModelInstance& inst, const Tables& t,
                         ObjectiveSelector objective) {
  switch (objective) {
    case ObjectiveSelector::ElboTable: {
      const Matrix p = softmax_grid(inst.prior().grid_logits());
      double acc = 0.0;
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          const double w = t.qzz.at(k, l);
          if (w == 0.0) continue;
          acc += w * (std::log(p.at(k, l)) - std::log(t.qz[k]) -
                      std::log(t.qzp[l]));
        }
      }
      return acc + expected_const_from(t, inst.data_joint());
    }
    case ObjectiveSelector::ElboMi: {
      double mi = 0.0;
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          const double w = t.qzz.at(k, l);
          if (w == 0.0) continue;
          mi += w * std::log(w / (t.qz[k] * t.qzp[l]));
        }
      }
      return mi + expected_const_from(t, inst.data_joint());
    }
    case ObjectiveSelector::ElboInfoNce:
    case ObjectiveSelector::InfoNceExact: {
      const CouplingFunction& f = inst.prior().coupling();
      const std::vector<double> log_z = log_normalizers(t, f);
      double acc = 0.0;
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          const double w = t.qzz.at(k, l);
          if (w == 0.0) continue;
          acc += w * f.log_value(k, l);
        }
        if (t.qz[k] > 0.0) acc -= t.qz[k] * log_z[k];
      }
      if (objective == ObjectiveSelector::ElboInfoNce) {
        acc += expected_const_from(t, inst.data_joint());
      }
      return acc;
    }
    case ObjectiveSelector::Unstructured: {
      if (inst.prior().kind() != PriorSpec::Kind::ExplicitTable) {
        // Implicit priors pin the z-marginal to Q(z); the KL term vanishes
        // identically and only the data constant remains.
        return c_side_const(t);
      }
      const Matrix p = softmax_grid(inst.prior().grid_logits());
      double kl = 0.0;
      for (std::size_t k = 0; k < t.nz; ++k) {
        if (t.qz[k] == 0.0) continue;
        double pz = 0.0;
        for (std::size_t l = 0; l < t.nzp; ++l) pz += p.at(k, l);
        if (pz == 0.0) {
          throw AbsoluteContinuityError(inst.latent_space(Side::C).label(k));
        }
        kl += t.qz[k] * std::log(t.qz[k] / pz);
      }
      return c_side_const(t) - kl;
    }
  }
  throw ValidationError("unknown objective selector");
}

}  // namespace

ParameterLayout::ParameterLayout(const ModelInstance& inst) {
  if (!inst.encoder_c().is_deterministic()) {
    encoder_c_count_ = inst.encoder_c().logits().data.size();
  }
  if (!inst.encoder_x().is_deterministic()) {
    encoder_x_count_ = inst.encoder_x().logits().data.size();
  }
  switch (inst.prior().kind()) {
    case PriorSpec::Kind::ExplicitTable:
      prior_count_ = inst.prior().grid_logits().data.size();
      break;
    case PriorSpec::Kind::InfoNce:
      if (inst.prior().coupling().kind() == CouplingFunction::Kind::Bilinear) {
        const CouplingFunction& f = inst.prior().coupling();
        prior_count_ = f.z_embeddings().data.size() +
                       f.zp_embeddings().data.size() + f.weight().data.size();
      }
      break;
    case PriorSpec::Kind::MutualInformation:
      break;
  }
  size_ = encoder_c_count_ + encoder_x_count_ + prior_count_;
}

std::vector<double> ParameterLayout::flatten(const ModelInstance& inst) const {
  std::vector<double> out;
  out.reserve(size_);
  if (encoder_c_count_ > 0) {
    const auto& d = inst.encoder_c().logits().data;
    out.insert(out.end(), d.begin(), d.end());
  }
  if (encoder_x_count_ > 0) {
    const auto& d = inst.encoder_x().logits().data;
    out.insert(out.end(), d.begin(), d.end());
  }
  if (prior_count_ > 0) {
    if (inst.prior().kind() == PriorSpec::Kind::ExplicitTable) {
      const auto& d = inst.prior().grid_logits().data;
      out.insert(out.end(), d.begin(), d.end());
    } else {
      const CouplingFunction& f = inst.prior().coupling();
      out.insert(out.end(), f.z_embeddings().data.begin(),
                 f.z_embeddings().data.end());
      out.insert(out.end(), f.zp_embeddings().data.begin(),
                 f.zp_embeddings().data.end());
      out.insert(out.end(), f.weight().data.begin(), f.weight().data.end());
    }
  }
  return out;
}

ModelInstance ParameterLayout::apply(const ModelInstance& proto,
                                     const std::vector<double>& params) const {
  if (params.size() != size_) {
    throw ValidationError("parameter vector size does not match the layout");
  }
  std::size_t offset = 0;
  Encoder enc_c = proto.encoder_c();
  if (encoder_c_count_ > 0) {
    Matrix logits = proto.encoder_c().logits();
    std::copy(params.begin() + offset,
              params.begin() + offset + encoder_c_count_, logits.data.begin());
    offset += encoder_c_count_;
    enc_c = Encoder::softmax(proto.encoder_c().given_space(),
                             proto.encoder_c().target_space(),
                             std::move(logits));
  }
  Encoder enc_x = proto.encoder_x();
  if (encoder_x_count_ > 0) {
    Matrix logits = proto.encoder_x().logits();
    std::copy(params.begin() + offset,
              params.begin() + offset + encoder_x_count_, logits.data.begin());
    offset += encoder_x_count_;
    enc_x = Encoder::softmax(proto.encoder_x().given_space(),
                             proto.encoder_x().target_space(),
                             std::move(logits));
  }
  PriorSpec prior = proto.prior();
  if (prior_count_ > 0) {
    if (proto.prior().kind() == PriorSpec::Kind::ExplicitTable) {
      Matrix logits = proto.prior().grid_logits();
      std::copy(params.begin() + offset, params.begin() + offset + prior_count_,
                logits.data.begin());
      prior = PriorSpec::explicit_table(std::move(logits));
    } else {
      const CouplingFunction& f = proto.prior().coupling();
      Matrix e = f.z_embeddings();
      Matrix ep = f.zp_embeddings();
      Matrix w = f.weight();
      auto it = params.begin() + offset;
      std::copy(it, it + e.data.size(), e.data.begin());
      it += e.data.size();
      std::copy(it, it + ep.data.size(), ep.data.begin());
      it += ep.data.size();
      std::copy(it, it + w.data.size(), w.data.begin());
      prior = PriorSpec::infonce(CouplingFunction::bilinear(
          std::move(e), std::move(ep), std::move(w)));
    }
  }
  return ModelInstance(proto.data_joint(), std::move(enc_c), std::move(enc_x),
                       std::move(prior));
}

double objective_value(const ModelInstance& inst,
                       ObjectiveSelector objective) {
  check_selector(inst, objective);
  return value_from_tables(inst, compute_tables(inst), objective);
}

double objective_value(const ModelInstance& inst,
                       const std::vector<double>& params,
                       ObjectiveSelector objective) {
  const ParameterLayout layout(inst);
  return objective_value(layout.apply(inst, params), objective);
}

// The gradient flows through three induced tables. Writing the objective as
// F(Qzz, Qz, Qz', theta) with partials dF/dQzz etc., the encoder chain is
//   dF/dA[c][k] = sum_l dF/dQzz[k][l] m[c][l] + dF/dQz[k] Dc[c]
//   dF/dB[x][l] = sum_k dF/dQzz[k][l] mp[x][k] + dF/dQz'[l] Dx[x]
// followed by the row-wise softmax Jacobian
//   dF/dlogit[c][j] = A[c][j] (dF/dA[c][j] - sum_k A[c][k] dF/dA[c][k]).
std::vector<double> objective_gradient(const ModelInstance& inst,
                                       const std::vector<double>& params,
                                       ObjectiveSelector objective) {
  const ParameterLayout layout(inst);
  const ModelInstance at = layout.apply(inst, params);
  check_selector(at, objective);
  const Tables t = compute_tables(at);

  Matrix d_qzz(t.nz, t.nzp, 0.0);
  std::vector<double> d_qz(t.nz, 0.0);
  std::vector<double> d_qzp(t.nzp, 0.0);
  std::vector<double> prior_grad;

  switch (objective) {
    case ObjectiveSelector::ElboTable: {
      const Matrix p = softmax_grid(at.prior().grid_logits());
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          d_qzz.at(k, l) = std::log(p.at(k, l));
        }
        if (t.qz[k] > 0.0) d_qz[k] = -(1.0 + std::log(t.qz[k]));
      }
      for (std::size_t l = 0; l < t.nzp; ++l) {
        if (t.qzp[l] > 0.0) d_qzp[l] = -(1.0 + std::log(t.qzp[l]));
      }
      prior_grad.resize(p.data.size());
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        prior_grad[i] = t.qzz.data[i] - p.data[i];
      }
      break;
    }
    case ObjectiveSelector::ElboMi: {
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          const double w = t.qzz.at(k, l);
          // Cells with zero induced mass always meet zero multipliers in
          // the chain below, so their adjoint is immaterial.
          d_qzz.at(k, l) = (w > 0.0) ? 1.0 + std::log(w) : 0.0;
        }
        if (t.qz[k] > 0.0) d_qz[k] = -(1.0 + std::log(t.qz[k]));
      }
      for (std::size_t l = 0; l < t.nzp; ++l) {
        if (t.qzp[l] > 0.0) d_qzp[l] = -(1.0 + std::log(t.qzp[l]));
      }
      break;
    }
    case ObjectiveSelector::ElboInfoNce:
    case ObjectiveSelector::InfoNceExact: {
      const CouplingFunction& f = at.prior().coupling();
      const std::vector<double> log_z = log_normalizers(t, f);
      // R[k][l] = Qz_k Qz'_l f(k,l) / Z_k (the resolved prior).
      Matrix r(t.nz, t.nzp, 0.0);
      for (std::size_t k = 0; k < t.nz; ++k) {
        for (std::size_t l = 0; l < t.nzp; ++l) {
          d_qzz.at(k, l) = f.log_value(k, l);
          if (t.qz[k] > 0.0 && t.qzp[l] > 0.0) {
            r.at(k, l) = t.qz[k] * std::exp(std::log(t.qzp[l]) +
                                            f.log_value(k, l) - log_z[k]);
          }
        }
        if (t.qz[k] > 0.0) d_qz[k] = -log_z[k];
      }
      for (std::size_t l = 0; l < t.nzp; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.nz; ++k) {
          if (t.qz[k] == 0.0) continue;
          acc += t.qz[k] * std::exp(f.log_value(k, l) - log_z[k]);
        }
        d_qzp[l] = -acc;
      }
      if (f.kind() == CouplingFunction::Kind::Bilinear) {
        // dF/dlog f(k,l) = Qzz - R; chain into embeddings and weight.
        const Matrix& e = f.z_embeddings();
        const Matrix& ep = f.zp_embeddings();
        const Matrix& w = f.weight();
        Matrix g(t.nz, t.nzp);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] = t.qzz.data[i] - r.data[i];
        }
        Matrix de(e.rows, e.cols, 0.0);
        Matrix dep(ep.rows, ep.cols, 0.0);
        Matrix dw(w.rows, w.cols, 0.0);
        for (std::size_t k = 0; k < t.nz; ++k) {
          for (std::size_t l = 0; l < t.nzp; ++l) {
            const double gkl = g.at(k, l);
            if (gkl == 0.0) continue;
            for (std::size_t a = 0; a < w.rows; ++a) {
              for (std::size_t b = 0; b < w.cols; ++b) {
                const double wab = w.at(a, b);
                de.at(k, a) += gkl * wab * ep.at(l, b);
                dep.at(l, b) += gkl * wab * e.at(k, a);
                dw.at(a, b) += gkl * e.at(k, a) * ep.at(l, b);
              }
            }
          }
        }
        prior_grad.reserve(de.data.size() + dep.data.size() + dw.data.size());
        prior_grad.insert(prior_grad.end(), de.data.begin(), de.data.end());
        prior_grad.insert(prior_grad.end(), dep.data.begin(), dep.data.end());
        prior_grad.insert(prior_grad.end(), dw.data.begin(), dw.data.end());
      }
      break;
    }
    case ObjectiveSelector::Unstructured: {
      if (at.prior().kind() == PriorSpec::Kind::ExplicitTable) {
        const Matrix p = softmax_grid(at.prior().grid_logits());
        std::vector<double> pz(t.nz, 0.0);
        for (std::size_t k = 0; k < t.nz; ++k) {
          for (std::size_t l = 0; l < t.nzp; ++l) pz[k] += p.at(k, l);
        }
        for (std::size_t k = 0; k < t.nz; ++k) {
          if (t.qz[k] > 0.0) {
            d_qz[k] = -(1.0 + std::log(t.qz[k]) - std::log(pz[k]));
          }
        }
        prior_grad.resize(p.data.size());
        for (std::size_t k = 0; k < t.nz; ++k) {
          for (std::size_t l = 0; l < t.nzp; ++l) {
            prior_grad[k * t.nzp + l] =
                p.at(k, l) * (t.qz[k] / pz[k] - 1.0);
          }
        }
      } else if (layout.prior_count_ > 0) {
        prior_grad.assign(layout.prior_count_, 0.0);
      }
      break;
    }
  }

  std::vector<double> grad;
  grad.reserve(layout.size());
  if (layout.encoder_c_trainable()) {
    for (std::size_t c = 0; c < t.nc; ++c) {
      std::vector<double> da(t.nz, 0.0);
      for (std::size_t k = 0; k < t.nz; ++k) {
        double acc = d_qz[k] * t.dc[c];
        for (std::size_t l = 0; l < t.nzp; ++l) {
          const double m = t.m.at(c, l);
          if (m != 0.0) acc += d_qzz.at(k, l) * m;
        }
        da[k] = acc;
      }
      double weighted = 0.0;
      for (std::size_t k = 0; k < t.nz; ++k) weighted += t.a.at(c, k) * da[k];
      for (std::size_t k = 0; k < t.nz; ++k) {
        grad.push_back(t.a.at(c, k) * (da[k] - weighted));
      }
    }
  }
  if (layout.encoder_x_trainable()) {
    for (std::size_t x = 0; x < t.nx; ++x) {
      std::vector<double> db(t.nzp, 0.0);
      for (std::size_t l = 0; l < t.nzp; ++l) {
        double acc = d_qzp[l] * t.dx[x];
        for (std::size_t k = 0; k < t.nz; ++k) {
          const double mp = t.mp.at(x, k);
          if (mp != 0.0) acc += d_qzz.at(k, l) * mp;
        }
        db[l] = acc;
      }
      double weighted = 0.0;
      for (std::size_t l = 0; l < t.nzp; ++l) weighted += t.b.at(x, l) * db[l];
      for (std::size_t l = 0; l < t.nzp; ++l) {
        grad.push_back(t.b.at(x, l) * (db[l] - weighted));
      }
    }
  }
  if (!prior_grad.empty()) {
    grad.insert(grad.end(), prior_grad.begin(), prior_grad.end());
  } else if (layout.prior_count_ > 0) {
    grad.insert(grad.end(), layout.prior_count_, 0.0);
  }
  return grad;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& params, double h) {
  std::vector<double> grad(params.size());
  std::vector<double> point = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    point[i] = params[i] + h;
    const double up = f(point);
    point[i] = params[i] - h;
    const double down = f(point);
    point[i] = params[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<double> finite_difference_gradient(const ModelInstance& inst,
                                               const std::vector<double>& params,
                                               ObjectiveSelector objective,
                                               double h) {
  return finite_difference_gradient(
      [&](const std::vector<double>& p) {
        return objective_value(inst, p, objective);
      },
      params, h);
}

TrainTrace train(const ModelInstance& inst, const TrainConfig& config,
                 const DiagnosticFn& diagnostic) {
  if (config.step_size <= 0.0 || config.gradient_tolerance <= 0.0) {
    throw ValidationError("train config needs positive step size and tolerance");
  }
  check_selector(inst, config.objective);
  const ParameterLayout layout(inst);
  std::vector<double> params = layout.flatten(inst);
  ModelInstance current = layout.apply(inst, params);
  double value = objective_value(current, config.objective);
  const double initial_objective = value;
  const double initial_diag = diagnostic ? diagnostic(current) : kNan;

  std::vector<TrainStep> steps;
  bool converged = layout.size() == 0;
  double step = config.step_size;
  if (!converged) {
    for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
      const std::vector<double> g =
          objective_gradient(inst, params, config.objective);
      const double grad_norm = max_norm(g);
      if (grad_norm < config.gradient_tolerance) {
        converged = true;
        break;
      }
      step *= 2.0;
      bool accepted = false;
      std::vector<double> candidate(params.size());
      while (step >= 1e-300) {
        for (std::size_t i = 0; i < params.size(); ++i) {
          candidate[i] = params[i] + step * g[i];
        }
        double candidate_value;
        try {
          candidate_value = objective_value(inst, candidate, config.objective);
        } catch (const Error&) {
          candidate_value = kNan;  // out of domain; shrink the step
        }
        if (std::isfinite(candidate_value) && candidate_value >= value) {
          params.swap(candidate);
          value = candidate_value;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // backtracking underflow: cannot improve
      current = layout.apply(inst, params);
      steps.push_back(TrainStep{iter, value, grad_norm, step,
                                diagnostic ? diagnostic(current) : kNan});
    }
  }
  return TrainTrace{initial_objective,
                    initial_diag,
                    std::move(steps),
                    std::move(params),
                    std::move(current),
                    converged};
}

TrainTrace shared_factor_experiment(std::size_t s_count,
                                    std::size_t noise_count,
                                    double noise_level,
                                    std::size_t latent_count,
                                    ObjectiveSelector objective,
                                    std::uint64_t seed,
                                    std::optional<TrainConfig> config) {
  if (latent_count < s_count) {
    throw ValidationError("latent_count must be at least s_count");
  }
  JointDistribution data =
      shared_factor_data_joint(s_count, noise_count, noise_level);
  const JointDistribution view_factor =
      shared_factor_view_factor_joint(s_count, noise_count, noise_level);

  SplitMix64 rng(seed);
  Matrix logits_c(data.rows(), latent_count);
  for (double& v : logits_c.data) v = 0.1 * rng.next_symmetric();
  Matrix logits_x(data.cols(), latent_count);
  for (double& v : logits_x.data) v = 0.1 * rng.next_symmetric();

  PriorSpec prior = PriorSpec::mutual_information();
  switch (objective) {
    case ObjectiveSelector::ElboMi:
      break;
    case ObjectiveSelector::ElboInfoNce:
    case ObjectiveSelector::InfoNceExact: {
      Matrix e(latent_count, latent_count);
      for (double& v : e.data) v = 0.1 * rng.next_symmetric();
      Matrix ep(latent_count, latent_count);
      for (double& v : ep.data) v = 0.1 * rng.next_symmetric();
      Matrix w(latent_count, latent_count);
      for (double& v : w.data) v = 0.1 * rng.next_symmetric();
      prior = PriorSpec::infonce(CouplingFunction::bilinear(
          std::move(e), std::move(ep), std::move(w)));
      break;
    }
    case ObjectiveSelector::ElboTable:
    case ObjectiveSelector::Unstructured: {
      Matrix grid(latent_count, latent_count);
      for (double& v : grid.data) v = 0.1 * rng.next_symmetric();
      prior = PriorSpec::explicit_table(std::move(grid));
      break;
    }
  }

  Encoder enc_c = Encoder::softmax(data.row_space(),
                                   labeled_range("z", latent_count),
                                   std::move(logits_c));
  Encoder enc_x = Encoder::softmax(data.col_space(),
                                   labeled_range("zp", latent_count),
                                   std::move(logits_x));
  ModelInstance inst(std::move(data), std::move(enc_c), std::move(enc_x),
                     std::move(prior));

  TrainConfig cfg = config.value_or(TrainConfig{});
  cfg.objective = objective;
  cfg.seed = seed;

  // Exact MI between the c-side latent and the hidden factor s.
  DiagnosticFn mi_z_s = [view_factor](const ModelInstance& m) {
    const Matrix a = m.encoder_c().probabilities();
    Matrix joint(a.cols, view_factor.cols(), 0.0);
    for (std::size_t c = 0; c < view_factor.rows(); ++c) {
      for (std::size_t s = 0; s < view_factor.cols(); ++s) {
        const double w = view_factor.prob(c, s);
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < a.cols; ++k) {
          joint.at(k, s) += a.at(c, k) * w;
        }
      }
    }
    return mutual_information(JointDistribution(
        m.latent_space(Side::C), view_factor.col_space(), std::move(joint)));
  };

  return train(inst, cfg, mi_z_s);
}

}  // namespace ssvae
