#pragma once

// libtorch defines glog-style CHECK macros; pull it in first and let
// doctest's definitions win.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_FALSE
#undef CHECK_NOTNULL

#include "doctest.h"
