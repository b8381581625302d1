#pragma once

#include "qb/core.hpp"
#include "qb/quadric.hpp"
#include "qb/peterson.hpp"
#include "qb/backlund.hpp"
#include "qb/lattice.hpp"
#include "qb/soliton.hpp"
#include "qb/verify.hpp"
#include "qb/io.hpp"
