#pragma once

#include "taro/analysis.hpp"
#include "taro/attacks.hpp"
#include "taro/autodiff.hpp"
#include "taro/common.hpp"
#include "taro/data.hpp"
#include "taro/io.hpp"
#include "taro/losses.hpp"
#include "taro/models.hpp"
#include "taro/target_selection.hpp"
#include "taro/tensor.hpp"
#include "taro/theory.hpp"
#include "taro/train.hpp"
