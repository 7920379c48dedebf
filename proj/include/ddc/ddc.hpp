#pragma once

#include "ddc/params.hpp"
#include "ddc/basis.hpp"
#include "ddc/transform.hpp"
#include "ddc/operators.hpp"
#include "ddc/system.hpp"
#include "ddc/spectrum.hpp"
#include "ddc/fit.hpp"
#include "ddc/hopf_branch.hpp"
#include "ddc/floquet.hpp"
#include "ddc/timestepper.hpp"
#include "ddc/io.hpp"
