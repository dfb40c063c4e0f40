# -*- coding: utf-8 -*-
"""
prunesearch: edge-pruned searchable encryption over clustered term tokens
邊緣剪枝加密搜尋系統
"""

__version__ = "1.0.0"
