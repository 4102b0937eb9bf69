# -*- coding: UTF-8 -*-
__version__ = '0.1.0'
__timestamp__ = 'unknown'
__license__ = 'Apache-2.0'
