#ifndef CAUSALNL_ADAM_HPP
#define CAUSALNL_ADAM_HPP

#include <cmath>
#include <vector>

#include "causalnl/graph.hpp"

namespace causalnl {

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Parameter* p : params_) {
            m_.emplace_back(p->value.rows, p->value.cols);
            v_.emplace_back(p->value.rows, p->value.cols);
        }
    }

    void zero_grad() {
        for (Parameter* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter& p = *params_[i];
            for (std::size_t j = 0; j < p.value.d.size(); ++j) {
                const double g = p.grad.d[j];
                m_[i].d[j] = beta1_ * m_[i].d[j] + (1.0 - beta1_) * g;
                v_[i].d[j] = beta2_ * v_[i].d[j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i].d[j] / bc1;
                const double vhat = v_[i].d[j] / bc2;
                p.value.d[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double lr() const { return lr_; }

private:
    std::vector<Parameter*> params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

} // namespace causalnl

#endif
