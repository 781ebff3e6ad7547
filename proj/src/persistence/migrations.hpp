#pragma once

#include <vector>

#include "emotalk/persistence.hpp"

namespace emotalk::db::detail {

const std::vector<Migration>& embedded_migrations();

}  // namespace emotalk::db::detail
