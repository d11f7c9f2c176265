#pragma once

#include "trilocal/behavior.hpp"
#include "trilocal/error.hpp"
#include "trilocal/families.hpp"
#include "trilocal/inequalities.hpp"
#include "trilocal/io.hpp"
#include "trilocal/model.hpp"
#include "trilocal/search.hpp"
#include "trilocal/w5.hpp"
