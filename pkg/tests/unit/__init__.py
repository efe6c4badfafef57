# This file is part of the W4 root finder.
# Copyright 2022 Canonical Ltd.
