#pragma once

#include <glog/logging.h>

#include <algorithm>
#include <mutex>

namespace ctmc::detail {

// Raises the glog threshold to errors once, unless the host already set it higher.
inline void quiet_solver_logs() {
    static std::once_flag once;
    std::call_once(once, [] { FLAGS_minloglevel = std::max(FLAGS_minloglevel, static_cast<int>(google::GLOG_ERROR)); });
}

} // namespace ctmc::detail
