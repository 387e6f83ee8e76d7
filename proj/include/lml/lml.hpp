#pragma once

#include "lml/error.hpp"
#include "lml/fit.hpp"
#include "lml/graph.hpp"
#include "lml/io.hpp"
#include "lml/schema.hpp"
#include "lml/search.hpp"
#include "lml/subset.hpp"
#include "lml/tables.hpp"
#include "lml/transform.hpp"
