#pragma once

#include <deque>
#include <stdexcept>

#include "kinoforge/sim/vehicle.hpp"

namespace kinoforge::sim {

class LatencyQueue {
public:
    explicit LatencyQueue(double tau = 0.25) : tau_(tau)
    {
        if (tau < 0)
            throw std::invalid_argument("latency must be non-negative");
    }

    double tau() const { return tau_; }
    std::size_t pending() const { return pending_.size(); }

    void push(const Control &u)
    {
        if (u.issue_time < last_issue_)
            throw std::invalid_argument("controls must be pushed in issue-time order");
        last_issue_ = u.issue_time;
        pending_.push_back(u);
    }

    bool matured(const Control &u, double t) const { return u.issue_time <= t - tau_ + 1e-9; }

    /// Most recent command with issue_time <= t - tau; zero before anything matures.
    /// Older matured commands are dropped as they can never become effective again.
    Control effective(double t)
    {
        while (!pending_.empty() && matured(pending_.front(), t)) {
            current_ = pending_.front();
            has_current_ = true;
            pending_.pop_front();
        }
        return has_current_ ? current_ : Control{};
    }

    void clear()
    {
        pending_.clear();
        has_current_ = false;
        current_ = Control{};
        last_issue_ = -1e300;
    }

private:
    double tau_;
    std::deque<Control> pending_;
    Control current_{};
    bool has_current_ = false;
    double last_issue_ = -1e300;
};

} // namespace kinoforge::sim
