#pragma once

#include "wtest/bootstrap.hpp"
#include "wtest/datagen.hpp"
#include "wtest/dual.hpp"
#include "wtest/error.hpp"
#include "wtest/inference.hpp"
#include "wtest/io.hpp"
#include "wtest/mmd.hpp"
#include "wtest/nn.hpp"
#include "wtest/parallel.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"
#include "wtest/trainer.hpp"
#include "wtest/transport.hpp"
