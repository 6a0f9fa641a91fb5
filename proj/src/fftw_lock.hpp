#pragma once

#include <mutex>

namespace polaron::detail {

/// FFTW's planner is not re-entrant; every plan create/destroy takes this lock.
std::mutex& fftw_planner_mutex();

}  // namespace polaron::detail
