"""
ACP-PHONON - Unit tests

Copyright (c) 2019 The acp-phonon developers
"""
