#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Allow user to run lpienet as a module."""

# Execute with:
# $ python -m lpienet

import lpienet

if __name__ == '__main__':
    lpienet.main()
