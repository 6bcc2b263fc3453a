#pragma once

#include "bandctl/auxiliary.hpp"
#include "bandctl/error.hpp"
#include "bandctl/fd_oracle.hpp"
#include "bandctl/io.hpp"
#include "bandctl/model.hpp"
#include "bandctl/policy.hpp"
#include "bandctl/qvi.hpp"
#include "bandctl/roots.hpp"
#include "bandctl/simulate.hpp"
